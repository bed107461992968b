//! Projectors, almost product and almost tangent structures, Nijenhuis operators.

use nalgebra::DVector;

use super::{bracket_gh, GhSection, GhVector, RhoEtaConnection};
use crate::algebroid::GeneralizedLieAlgebroid;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mechanics::GhMorphism;

/// Endomorphisms of the generalized tangent bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endomorphism {
    /// Vertical projector.
    V,
    /// Horizontal projector.
    H,
    /// Almost product structure `H − V`.
    P,
    /// Almost tangent structure of a `(g, h)` morphism.
    J,
}

/// Apply `e` to a natural-base vector at `u`.
pub fn apply_endomorphism(
    e: Endomorphism,
    conn: &RhoEtaConnection,
    gh: Option<&GhMorphism>,
    u: &[f64],
    xv: &GhVector,
) -> Result<GhVector> {
    let p = xv.z.len();
    match e {
        Endomorphism::V => {
            let g = conn.gamma(u);
            Ok(GhVector::new(DVector::zeros(p), &xv.v + &g * &xv.z))
        }
        Endomorphism::H => {
            let g = conn.gamma(u);
            Ok(GhVector::new(xv.z.clone(), -(&g * &xv.z)))
        }
        Endomorphism::P => {
            let g = conn.gamma(u);
            Ok(GhVector::new(xv.z.clone(), -(&g * &xv.z) * 2.0 - &xv.v))
        }
        Endomorphism::J => {
            let gh = gh.ok_or_else(|| Error::InvalidArgument("almost tangent structure needs a (g, h) morphism".into()))?;
            j_value(gh, &u[..conn.m()], xv)
        }
    }
}

fn j_value(gh: &GhMorphism, x: &[f64], xv: &GhVector) -> Result<GhVector> {
    if xv.z.len() != xv.v.len() {
        return Err(Error::InvalidArgument("almost tangent structure requires p = r".into()));
    }
    let gt = gh.g_tilde_h(x)?;
    Ok(GhVector::new(DVector::zeros(xv.z.len()), gt * &xv.z))
}

pub fn vertical_proj(conn: &RhoEtaConnection, x: &GhSection, u: &[f64]) -> GhVector {
    apply_endomorphism(Endomorphism::V, conn, None, u, &x.eval(u)).expect("projector is total")
}

pub fn horizontal_proj(conn: &RhoEtaConnection, x: &GhSection, u: &[f64]) -> GhVector {
    apply_endomorphism(Endomorphism::H, conn, None, u, &x.eval(u)).expect("projector is total")
}

pub fn almost_product(conn: &RhoEtaConnection, x: &GhSection, u: &[f64]) -> GhVector {
    apply_endomorphism(Endomorphism::P, conn, None, u, &x.eval(u)).expect("projector is total")
}

/// `J(Z^α δ̃_α + Y^a ∂̃̇_a) = (g̃^b_a∘h∘π) Z^a ∂̃̇_b`.
pub fn almost_tangent(gh: &GhMorphism, x: &GhSection, u: &[f64]) -> Result<GhVector> {
    j_value(gh, &u[..x.m()], &x.eval(u))
}

/// The section `eX`. Evaluation failures (e.g. a singular `g`) surface as NaN coefficients.
pub fn endomorphism_section(
    e: Endomorphism,
    conn: &RhoEtaConnection,
    gh: Option<&GhMorphism>,
    x: &GhSection,
) -> GhSection {
    let (m, p, r) = (x.m(), x.p(), x.r());
    let (c, g, s) = (conn.clone(), gh.cloned(), x.clone());
    let f = Field::new(m + r, &[p + r], move |u| match apply_endomorphism(e, &c, g.as_ref(), u, &s.eval(u)) {
        Ok(v) => v.to_vec(),
        Err(_) => vec![f64::NAN; p + r],
    })
    .with_fd(x.coeffs().fd());
    GhSection::new(m, p, r, f)
}

/// `N_e(X, Y) = [eX, eY] + e²[X, Y] − e[eX, Y] − e[X, eY]` at `u`.
pub fn nijenhuis(
    a: &GeneralizedLieAlgebroid,
    e: Endomorphism,
    conn: &RhoEtaConnection,
    gh: Option<&GhMorphism>,
    x: &GhSection,
    y: &GhSection,
    u: &[f64],
) -> Result<GhVector> {
    let ex = endomorphism_section(e, conn, gh, x);
    let ey = endomorphism_section(e, conn, gh, y);
    let apply = |v: &GhVector| apply_endomorphism(e, conn, gh, u, v);
    let t1 = bracket_gh(a, &ex, &ey, u)?;
    let t2 = apply(&apply(&bracket_gh(a, x, y, u)?)?)?;
    let t3 = apply(&bracket_gh(a, &ex, y, u)?)?;
    let t4 = apply(&bracket_gh(a, x, &ey, u)?)?;
    Ok(&(&(&t1 + &t2) - &t3) - &t4)
}
