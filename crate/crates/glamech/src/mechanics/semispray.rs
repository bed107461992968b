//! Semisprays, sprays and the connections they induce.

use nalgebra::{DMatrix, DVector};

use super::{lagrangian::invert_hessian, lagrangian_jet, ExternalForce, GhMorphism, LagrangeMechanicalSystem, MechanicalSystem};
use crate::algebroid::GeneralizedLieAlgebroid;
use crate::error::{ensure_finite, Result};
use crate::field::{matrix_to_row_major, Field};
use crate::geometry::{
    berwald, bracket_gh, curvature, h_cov_deriv, AdaptedTensorField, GhSection, GhVector, RhoEtaConnection, Valence,
};

/// `combo = −2(G − ¼F)` and the isolated `G = ¼F − ½ combo`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemisprayCoefficients {
    pub combo: DVector<f64>,
    pub g_part: DVector<f64>,
}

/// Euler–Lagrange covector
/// `E_b = ρ^i_b L_i − ρ^i_b y^a L_{ia} − Z^d ρ^i_d ∂_i P_b + Z^d ρ^i_b ∂_i P_d + Z^d L^c_{db} P_c`
/// with `Z = g y` and `P_b = g̃^e_b L_e`.
pub fn el_covector(sys: &LagrangeMechanicalSystem, u: &[f64]) -> Result<DVector<f64>> {
    let (m, r) = (sys.m(), sys.r());
    let (x, y) = u.split_at(m);
    let a = sys.algebroid();
    let gh = sys.gh();
    let rho = a.rho_h(x);
    let l = a.l_h(x);
    let g = gh.g_h(x);
    let gt = gh.g_tilde_h(x)?;
    let jet = lagrangian_jet(sys.lagrangian(), u)?;
    let yv = DVector::from_column_slice(y);
    let z = &g * &yv;
    let p = gt.transpose() * &jet.l_y;
    // dp[(i, b)] = ∂_i P_b
    let mut dp = DMatrix::zeros(m, r);
    for i in 0..m {
        let dgt = gh.g_tilde_h_field().partial_matrix(x, i);
        let row = dgt.transpose() * &jet.l_y + gt.transpose() * jet.l_xy.row(i).transpose();
        dp.row_mut(i).copy_from(&row.transpose());
    }
    let mut e = DVector::zeros(r);
    for b in 0..r {
        let mut s = 0.0;
        for i in 0..m {
            s += rho[(i, b)] * jet.l_x[i];
            s -= rho[(i, b)] * (jet.l_xy.row(i) * &yv)[0];
        }
        for d in 0..r {
            if z[d] == 0.0 {
                continue;
            }
            for i in 0..m {
                s -= z[d] * rho[(i, d)] * dp[(i, b)];
                s += z[d] * rho[(i, b)] * dp[(i, d)];
            }
            for c in 0..r {
                s += z[d] * l[[c, d, b]] * p[c];
            }
        }
        e[b] = s;
    }
    ensure_finite("Euler-Lagrange covector", u, e.as_slice())?;
    Ok(e)
}

/// `−2(G^a − ¼F^a) = E_b L̃^{ae} g^b_e`.
pub fn canonical_semispray(sys: &LagrangeMechanicalSystem, u: &[f64]) -> Result<SemisprayCoefficients> {
    let x = &u[..sys.m()];
    let e = el_covector(sys, u)?;
    let jet = lagrangian_jet(sys.lagrangian(), u)?;
    let linv = invert_hessian(&jet.l_yy, u)?;
    let g = sys.gh().g_h(x);
    let combo = linv * g.transpose() * e;
    let f = sys.force().eval(u);
    let g_part = &f * 0.25 - &combo * 0.5;
    ensure_finite("semispray", u, combo.as_slice())?;
    Ok(SemisprayCoefficients { combo, g_part })
}

/// `−2(G − ¼F)` from user-supplied `G` and `F`.
pub fn mechanical_semispray(ms: &MechanicalSystem, u: &[f64]) -> DVector<f64> {
    let g = ms.spray().eval_vector(u);
    let f = ms.force().eval(u);
    (g - f * 0.25) * -2.0
}

/// `C^a_c = −½ Z^d L^f_{dc} g̃^a_f + ½ ρ^j_c ∂_j(g^b_e) y^e g̃^a_b + ½ Z^b ρ^i_b ∂_i(g̃^a_c)`.
fn correction_terms(a: &GeneralizedLieAlgebroid, gh: &GhMorphism, u: &[f64]) -> Result<DMatrix<f64>> {
    let m = a.m();
    let r = gh.r();
    let (x, y) = u.split_at(m);
    let rho = a.rho_h(x);
    let l = a.l_h(x);
    let g = gh.g_h(x);
    let gt = gh.g_tilde_h(x)?;
    let yv = DVector::from_column_slice(y);
    let z = &g * &yv;
    let mut out = DMatrix::zeros(r, r);
    // −½ Z^d L^f_{dc} g̃^a_f
    let mut zl = DMatrix::zeros(r, r); // zl[(f, c)] = Z^d L^f_{dc}
    for f in 0..r {
        for c in 0..r {
            zl[(f, c)] = (0..r).map(|d| z[d] * l[[f, d, c]]).sum();
        }
    }
    out -= &gt * zl * 0.5;
    if m > 0 {
        let zrho = &rho * &z; // ρ^i_b Z^b
        for j in 0..m {
            // ½ ρ^j_c (∂_j g · y)^b g̃^a_b
            let dgy = gh.g_h_field().partial_matrix(x, j) * &yv;
            let v = &gt * dgy;
            for c in 0..r {
                for aa in 0..r {
                    out[(aa, c)] += 0.5 * rho[(j, c)] * v[aa];
                }
            }
            // ½ Z^b ρ^j_b ∂_j(g̃)
            out += gh.g_tilde_h_field().partial_matrix(x, j) * (0.5 * zrho[j]);
        }
    }
    Ok(out)
}

/// Connection induced by a semispray with vertical coefficients `combo = −2(G − ¼F)`:
/// `Γ^a_c = g̃^b_c ∂(G^a − ¼F^a)/∂y^b + C^a_c`.
///
/// The last correction term carries `+½`, the sign for which `J[S, X] − [S, JX]` is the
/// almost product structure of `Γ`.
pub fn connection_from_semispray(
    a: &GeneralizedLieAlgebroid,
    gh: &GhMorphism,
    combo: &Field,
    u: &[f64],
) -> Result<DMatrix<f64>> {
    let m = a.m();
    let r = gh.r();
    let gt = gh.g_tilde_h(&u[..m])?;
    // dk[(a, b)] = ∂(G^a − ¼F^a)/∂y^b = −½ ∂combo^a/∂y^b
    let cols: Vec<Vec<f64>> = (0..r).map(|b| combo.partial(u, m + b)).collect();
    let dk = DMatrix::from_fn(r, r, |aa, b| -0.5 * cols[b][aa]);
    let gamma = dk * gt + correction_terms(a, gh, u)?;
    ensure_finite("connection", u, gamma.as_slice())?;
    Ok(gamma)
}

fn connection_field(a: &GeneralizedLieAlgebroid, gh: &GhMorphism, combo: Field) -> RhoEtaConnection {
    let m = a.m();
    let r = gh.r();
    let (a1, g1) = (a.clone(), gh.clone());
    let fd = combo.fd();
    let f = Field::new(m + r, &[r, r], move |u| match connection_from_semispray(&a1, &g1, &combo, u) {
        Ok(g) => matrix_to_row_major(&g),
        Err(_) => vec![f64::NAN; r * r],
    })
    .with_fd(fd);
    RhoEtaConnection::new(m, r, r, f)
}

/// Connection associated to a Lagrange mechanical system.
pub fn lagrange_connection(sys: &LagrangeMechanicalSystem) -> RhoEtaConnection {
    connection_field(sys.algebroid(), sys.gh(), sys.combo_field())
}

/// Connection of the canonical semispray of a mechanical system.
pub fn mechanical_connection(ms: &MechanicalSystem) -> RhoEtaConnection {
    connection_field(ms.algebroid(), ms.gh(), ms.combo_field())
}

/// `Γ̊ = Γ + ¼ g̃·∂F/∂y`.
pub fn ring_connection(conn: &RhoEtaConnection, force: &ExternalForce, gh: &GhMorphism, u: &[f64]) -> Result<DMatrix<f64>> {
    let m = conn.m();
    let gt = gh.g_tilde_h(&u[..m])?;
    Ok(conn.gamma(u) + force.dfdy(u, m) * gt * 0.25)
}

pub fn ring_connection_field(conn: &RhoEtaConnection, force: &ExternalForce, gh: &GhMorphism) -> RhoEtaConnection {
    let (m, p, r) = (conn.m(), conn.p(), conn.r());
    let (c, f, g) = (conn.clone(), force.clone(), gh.clone());
    let field = Field::new(m + r, &[r, p], move |u| match ring_connection(&c, &f, &g, u) {
        Ok(v) => matrix_to_row_major(&v),
        Err(_) => vec![f64::NAN; r * p],
    })
    .with_fd(conn.field().fd());
    RhoEtaConnection::new(m, p, r, field)
}

/// Max-norm of the difference between the curvature of `Γ̊` and its expansion through the
/// curvature of `Γ`, Berwald h-covariant derivatives of `∂F/∂y`, second fibre derivatives
/// of `F` and the structure-function term.
///
/// The two bracketed differences are taken with the orientation `(c, d)` of the curvature
/// convention `ℝ_{cd} = ρ̃(δ̃_d)Γ_c − ρ̃(δ̃_c)Γ_d + L^e_{cd}Γ_e`. The expansion is exact when
/// `g̃` is constant and `∂Γ^a_c/∂y^d` is symmetric in `(c, d)`.
pub fn ring_curvature_identity(
    a: &GeneralizedLieAlgebroid,
    conn: &RhoEtaConnection,
    force: &ExternalForce,
    gh: &GhMorphism,
    u: &[f64],
) -> Result<f64> {
    let (m, r) = (conn.m(), conn.r());
    let x = &u[..m];
    let ring = ring_connection_field(conn, force, gh);
    let direct = curvature(a, &ring, u)?;
    let base = curvature(a, conn, u)?;
    let gt = gh.g_tilde_h(x)?;
    let l = a.l_h(x);
    let df = force.dfdy(u, m);
    let t = AdaptedTensorField::new(m, r, r, Valence::new(0, 0, 1, 1), force.dfdy_field(m))?;
    let bw = berwald(conn)?;
    let tc: Vec<DMatrix<f64>> = (0..r)
        .map(|c| {
            let d = h_cov_deriv(a, &bw, &t, c, u)?;
            Ok(DMatrix::from_row_slice(r, r, d.as_slice().expect("standard layout")))
        })
        .collect::<Result<_>>()?;
    // d2[e][(a, b)] = ∂²F^a/∂y^b∂y^e
    let dff = force.dfdy_field(m);
    let d2: Vec<DMatrix<f64>> = (0..r).map(|e| dff.partial_matrix(u, m + e)).collect();
    let mut resid: f64 = 0.0;
    for aa in 0..r {
        for c in 0..r {
            for d in 0..r {
                let mut s = base[[aa, c, d]];
                let mut cov = 0.0;
                for e in 0..r {
                    cov += gt[(e, c)] * tc[d][(aa, e)] - gt[(e, d)] * tc[c][(aa, e)];
                }
                s += 0.25 * cov;
                let mut quad = 0.0;
                for b in 0..r {
                    for e in 0..r {
                        for f in 0..r {
                            quad += gt[(f, c)] * df[(b, f)] * gt[(e, d)] * d2[e][(aa, b)]
                                - gt[(e, d)] * df[(b, e)] * gt[(f, c)] * d2[f][(aa, b)];
                        }
                    }
                }
                s += quad / 16.0;
                let mut lt = 0.0;
                for f in 0..r {
                    for e in 0..r {
                        lt += l[[f, c, d]] * gt[(e, f)] * df[(aa, e)];
                    }
                }
                s += 0.25 * lt;
                resid = resid.max((direct[[aa, c, d]] - s).abs());
            }
        }
    }
    Ok(resid)
}

/// Liouville section `ℂ = y^a ∂̃̇_a`.
pub fn liouville(m: usize, r: usize) -> GhSection {
    let v = Field::new(m + r, &[r], move |u| u[m..].to_vec()).with_partials(move |_| {
        let mut d = vec![0.0; (m + r) * r];
        for b in 0..r {
            d[(m + b) * r + b] = 1.0;
        }
        d
    });
    GhSection::from_parts(m, Field::zeros(m + r, &[r]), v)
}

/// `[ℂ, S] − S`.
pub fn spray_deviation(a: &GeneralizedLieAlgebroid, s: &GhSection, u: &[f64]) -> Result<GhVector> {
    let c = liouville(s.m(), s.r());
    let b = bracket_gh(a, &c, s, u)?;
    Ok(&b - &s.eval(u))
}

/// `2(G − ¼F) = Γ^a_c Z^c + ½ Z^d L^b_{dc} g̃^a_b Z^c − ½ ρ^j_c ∂_j(g^b_e) y^e g̃^a_b Z^c
/// − ½ Z^b ρ^i_b ∂_i(g̃^a_c) Z^c`, with `Z = g y`.
pub fn spray_coefficients(
    a: &GeneralizedLieAlgebroid,
    conn: &RhoEtaConnection,
    gh: &GhMorphism,
    u: &[f64],
) -> Result<DVector<f64>> {
    let m = a.m();
    let (x, y) = u.split_at(m);
    let z = gh.g_h(x) * DVector::from_column_slice(y);
    let out = (conn.gamma(u) - correction_terms(a, gh, u)?) * z;
    ensure_finite("spray coefficients", u, out.as_slice())?;
    Ok(out)
}

/// `S = (g y)^a ∂̃_a + combo^a ∂̃̇_a`.
pub fn semispray_section(m: usize, gh: &GhMorphism, combo: Field) -> GhSection {
    let r = gh.r();
    let g = gh.clone();
    let z = Field::new(m + r, &[r], move |u| {
        let (x, y) = u.split_at(m);
        (g.g_h(x) * DVector::from_column_slice(y)).iter().copied().collect()
    });
    GhSection::from_parts(m, z, combo)
}

/// Canonical spray of a connection.
pub fn spray_section(a: &GeneralizedLieAlgebroid, conn: &RhoEtaConnection, gh: &GhMorphism) -> GhSection {
    let r = gh.r();
    let (a1, c1, g1) = (a.clone(), conn.clone(), gh.clone());
    let combo = Field::new(a.m() + r, &[r], move |u| match spray_coefficients(&a1, &c1, &g1, u) {
        Ok(v) => v.iter().map(|s| -s).collect(),
        Err(_) => vec![f64::NAN; r],
    });
    semispray_section(a.m(), gh, combo)
}
