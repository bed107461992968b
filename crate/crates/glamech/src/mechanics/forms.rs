//! Poincaré–Cartan forms, the semispray equation and the chart behaviour of `G`.

use nalgebra::DVector;

use super::{canonical_semispray, energy, semispray_section, ExternalForce, GhMorphism, LagrangeMechanicalSystem, Lagrangian};
use crate::algebroid::ChartChange;
use crate::error::Result;
use crate::field::{matrix_to_row_major, Field};
use crate::geometry::{bracket_gh, rho_tilde_value, GhSection};

/// `θ_L(X) = (g̃^e_a L_e) Z^a`.
pub fn theta_l(sys: &LagrangeMechanicalSystem, x: &GhSection, u: &[f64]) -> Result<f64> {
    let m = sys.m();
    let gt = sys.gh().g_tilde_h(&u[..m])?;
    let jet = super::lagrangian_jet(sys.lagrangian(), u)?;
    let p = gt.transpose() * jet.l_y;
    Ok(p.dot(&x.eval(u).z))
}

fn theta_field(sys: &LagrangeMechanicalSystem, x: &GhSection) -> Field {
    let (s, sec) = (sys.clone(), x.clone());
    Field::scalar(sys.m() + sys.r(), move |u| theta_l(&s, &sec, u).unwrap_or(f64::NAN))
}

/// `ω_L(U, V) = ρ̃(U)(θ_L(V)) − ρ̃(V)(θ_L(U)) − θ_L([U, V])`.
pub fn omega_l(sys: &LagrangeMechanicalSystem, uu: &GhSection, vv: &GhSection, u: &[f64]) -> Result<f64> {
    let a = sys.algebroid();
    let x = &u[..sys.m()];
    let wu = rho_tilde_value(a, x, &uu.eval(u));
    let wv = rho_tilde_value(a, x, &vv.eval(u));
    let d1 = theta_field(sys, vv).directional(u, wu.as_slice())[0];
    let d2 = theta_field(sys, uu).directional(u, wv.as_slice())[0];
    let br = bracket_gh(a, uu, vv, u)?;
    let m = sys.m();
    let gt = sys.gh().g_tilde_h(&u[..m])?;
    let jet = super::lagrangian_jet(sys.lagrangian(), u)?;
    let t = (gt.transpose() * jet.l_y).dot(&br.z);
    Ok(d1 - d2 - t)
}

/// `|ω_L(S, X) + ρ̃(X)(E_L)|` for the canonical semispray `S`.
pub fn semispray_equation_residual(sys: &LagrangeMechanicalSystem, x: &GhSection, u: &[f64]) -> Result<f64> {
    let s = semispray_section(sys.m(), sys.gh(), sys.combo_field());
    semispray_equation_residual_with(sys, &s, x, u)
}

/// Same residual for an arbitrary candidate section `s`.
pub fn semispray_equation_residual_with(
    sys: &LagrangeMechanicalSystem,
    s: &GhSection,
    x: &GhSection,
    u: &[f64],
) -> Result<f64> {
    let w = omega_l(sys, s, x, u)?;
    let l = sys.lagrangian().clone();
    let e = Field::scalar(sys.m() + sys.r(), move |q| energy(&l, q).unwrap_or(f64::NAN));
    let dir = rho_tilde_value(sys.algebroid(), &u[..sys.m()], &x.eval(u));
    let de = e.directional(u, dir.as_slice())[0];
    Ok((w + de).abs())
}

/// Residual of `2G' = 2 M G − (ρ g y)^i ∂_i(M) y` at `u`, where `G'` is recomputed from the
/// system rewritten in the target chart of `cc` (`L'(x', y') = L(x, y)`, `F' = M F`,
/// `g' = Λ g M⁻¹`, algebroid from [`ChartChange::transform_algebroid`]). Assumes `h = id`.
pub fn semispray_transform_check(sys: &LagrangeMechanicalSystem, cc: &ChartChange, u: &[f64]) -> Result<f64> {
    let (m, r) = (sys.m(), sys.r());
    let (x, y) = u.split_at(m);
    cc.check(x, x)?;
    let a = sys.algebroid();
    let a2 = cc.transform_algebroid(a)?;

    let cc1 = cc.clone();
    let l0 = sys.lagrangian().clone();
    let value = Field::scalar(m + r, move |up| l0.value(&cc1.inverse_point(up))).with_fd(a.fd());
    let mut l2 = Lagrangian::new(m, r, value);
    if !sys.lagrangian().smooth_at_zero() {
        l2 = l2.non_smooth_at_zero();
    }

    let (cc1, gh0) = (cc.clone(), sys.gh().clone());
    let g2 = Field::new(m, &[r, r], move |xp| {
        let x = cc1.base_inverse().eval(xp);
        let mi = cc1.fibre(&x).try_inverse().unwrap_or_else(|| nalgebra::DMatrix::from_element(r, r, f64::NAN));
        matrix_to_row_major(&(cc1.lambda(&x) * gh0.g_h(&x) * mi))
    });
    let gh2 = GhMorphism::from_g(g2, Field::identity(m))?;

    let (cc1, f0) = (cc.clone(), sys.force().clone());
    let f2 = Field::new(m + r, &[r], move |up| {
        let q = cc1.inverse_point(up);
        (cc1.fibre(&q[..m]) * f0.eval(&q)).iter().copied().collect()
    });
    let sys2 = LagrangeMechanicalSystem::new(a2, gh2, l2, ExternalForce::new(f2))?;

    let up = cc.transform_point(u);
    let g_new = canonical_semispray(&sys2, &up)?.g_part;

    let g_old = canonical_semispray(sys, u)?.g_part;
    let yv = DVector::from_column_slice(y);
    let w = a.rho_h(x) * sys.gh().g_h(x) * &yv;
    let mut pred = cc.fibre(x) * g_old;
    for i in 0..m {
        pred -= cc.fibre_matrix().partial_matrix(x, i) * &yv * (0.5 * w[i]);
    }
    Ok((g_new - pred).amax())
}
