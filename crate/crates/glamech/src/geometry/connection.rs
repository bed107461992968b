//! Nonlinear (ρ,η)-connections, adapted frames and curvature.

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;

use super::{GhCovector, GhSection, GhVector};
use crate::algebroid::{ChartChange, GeneralizedLieAlgebroid};
use crate::error::{ensure_finite, Result};
use crate::field::{matrix_to_row_major, Field};
use crate::linalg::invert;

/// Connection coefficients `Γ^a_γ(x, y)`, stored as an `r × p` field on bundle coordinates.
#[derive(Clone, Debug)]
pub struct RhoEtaConnection {
    m: usize,
    p: usize,
    r: usize,
    gamma: Field,
}

impl RhoEtaConnection {
    pub fn new(m: usize, p: usize, r: usize, gamma: Field) -> Self {
        assert_eq!(gamma.n_in(), m + r, "connection input must be bundle coordinates");
        assert_eq!(gamma.shape(), [r, p], "connection must have shape [r, p]");
        RhoEtaConnection { m, p, r, gamma }
    }

    pub fn from_fn<F>(m: usize, p: usize, r: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        RhoEtaConnection::new(m, p, r, Field::new(m + r, &[r, p], f))
    }

    pub fn zero(m: usize, p: usize, r: usize) -> Self {
        RhoEtaConnection::new(m, p, r, Field::zeros(m + r, &[r, p]))
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn field(&self) -> &Field {
        &self.gamma
    }

    pub fn gamma(&self, u: &[f64]) -> DMatrix<f64> {
        self.gamma.eval_matrix(u)
    }

    /// `∂Γ/∂y^b` as an `r × p` matrix.
    pub fn dgamma_dy(&self, u: &[f64], b: usize) -> DMatrix<f64> {
        self.gamma.partial_matrix(u, self.m + b)
    }
}

/// `δ̃_α = ∂̃_α − Γ^a_α ∂̃̇_a` at `u`.
pub fn adapted_frame(conn: &RhoEtaConnection, alpha: usize, u: &[f64]) -> GhVector {
    let g = conn.gamma(u);
    let mut z = DVector::zeros(conn.p);
    z[alpha] = 1.0;
    GhVector::new(z, -g.column(alpha).into_owned())
}

pub fn adapted_frame_section(conn: &RhoEtaConnection, alpha: usize) -> GhSection {
    let (m, p, r) = (conn.m, conn.p, conn.r);
    let c = conn.clone();
    let mut sec = Field::new(m + r, &[p + r], move |u| adapted_frame(&c, alpha, u).to_vec()).with_fd(conn.gamma.fd());
    if conn.gamma.has_partials() {
        let c = conn.clone();
        sec = sec.with_partials(move |u| {
            let mut d = Vec::with_capacity((m + r) * (p + r));
            for k in 0..m + r {
                let dg = c.gamma.partial_matrix(u, k);
                d.extend(std::iter::repeat_n(0.0, p));
                d.extend(dg.column(alpha).iter().map(|v| -v));
            }
            d
        });
    }
    GhSection::new(m, p, r, sec)
}

/// `δỹ^a = Γ^a_α dz̃^α + dỹ^a` at `u`.
pub fn adapted_coframe(conn: &RhoEtaConnection, a: usize, u: &[f64]) -> GhCovector {
    let g = conn.gamma(u);
    let mut vc = DVector::zeros(conn.r);
    vc[a] = 1.0;
    GhCovector { zc: g.row(a).transpose(), vc }
}

/// `ℝ^a_{αβ} = ρ̃(δ̃_β)(Γ^a_α) − ρ̃(δ̃_α)(Γ^a_β) + L_h^γ_{αβ} Γ^a_γ`, indexed `[a][α][β]`.
pub fn curvature(a: &GeneralizedLieAlgebroid, conn: &RhoEtaConnection, u: &[f64]) -> Result<Array3<f64>> {
    let (m, p, r) = (conn.m, conn.p, conn.r);
    let x = &u[..m];
    let g = conn.gamma(u);
    let rho = a.rho_h(x);
    let l = a.l_h(x);
    // dg[β] = ρ̃(δ̃_β)(Γ), an r × p matrix
    let dg: Vec<DMatrix<f64>> = (0..p)
        .map(|be| {
            let mut w = vec![0.0; m + r];
            for i in 0..m {
                w[i] = rho[(i, be)];
            }
            for b in 0..r {
                w[m + b] = -g[(b, be)];
            }
            DMatrix::from_row_slice(r, p, &conn.gamma.directional(u, &w))
        })
        .collect();
    let mut out = Array3::zeros((r, p, p));
    for c in 0..r {
        for al in 0..p {
            for be in 0..p {
                let mut s = dg[be][(c, al)] - dg[al][(c, be)];
                for ga in 0..p {
                    s += l[[ga, al, be]] * g[(c, ga)];
                }
                out[[c, al, be]] = s;
            }
        }
    }
    ensure_finite("curvature", u, out.as_slice().unwrap_or(&[]))?;
    Ok(out)
}

/// `Γ' = (M Γ − ρ_h^k_γ ∂_k M y) Λ_h⁻¹` at the original point `u`.
fn transformed_gamma(a: &GeneralizedLieAlgebroid, conn: &RhoEtaConnection, cc: &ChartChange, u: &[f64]) -> DMatrix<f64> {
    let (m, p, r) = (conn.m, conn.p, conn.r);
    let (x, y) = u.split_at(m);
    let hx = a.h_map().eval(x);
    let mm = cc.fibre(x);
    let lam_inv = cc
        .lambda(&hx)
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(p, p, f64::NAN));
    let rho = a.rho_h(x);
    let yv = DVector::from_column_slice(y);
    let mut inner = &mm * conn.gamma(u);
    for k in 0..m {
        let dmy = cc.fibre_matrix().partial_matrix(x, k) * &yv;
        for ga in 0..p {
            for b in 0..r {
                inner[(b, ga)] -= rho[(k, ga)] * dmy[b];
            }
        }
    }
    inner * lam_inv
}

/// The connection expressed in the target chart of `cc`: a field on transformed bundle
/// coordinates. Points where `cc` is singular evaluate to NaN.
pub fn transform_connection(a: &GeneralizedLieAlgebroid, conn: &RhoEtaConnection, cc: &ChartChange) -> RhoEtaConnection {
    let (m, p, r) = (conn.m, conn.p, conn.r);
    let (a1, c1, cc1) = (a.clone(), conn.clone(), cc.clone());
    let gamma = Field::new(m + r, &[r, p], move |up| {
        let u = cc1.inverse_point(up);
        matrix_to_row_major(&transformed_gamma(&a1, &c1, &cc1, &u))
    })
    .with_fd(conn.gamma.fd());
    RhoEtaConnection::new(m, p, r, gamma)
}

/// Transformed coefficients at `cc(u)`, with the chart change checked at `u`.
pub fn transform_connection_at(
    a: &GeneralizedLieAlgebroid,
    conn: &RhoEtaConnection,
    cc: &ChartChange,
    u: &[f64],
) -> Result<DMatrix<f64>> {
    let x = &u[..conn.m];
    let hx = a.h_map().eval(x);
    cc.check(x, &hx)?;
    invert("f matrix", &hx, &cc.lambda(&hx))?;
    let g = transformed_gamma(a, conn, cc, u);
    ensure_finite("transformed connection", u, g.as_slice())?;
    Ok(g)
}
