//! The generalized tangent bundle `(ρ,η)TE` over `E = (x, y)`.
//!
//! Sections are stored against the natural base `(∂̃_α, ∂̃̇_a)` as a single field of shape
//! `[p + r]`: the first `p` entries are `Z^α`, the last `r` entries are `Y^a`.

mod connection;
mod distinguished;
mod structures;

pub use connection::{
    adapted_coframe, adapted_frame, adapted_frame_section, curvature, transform_connection, transform_connection_at,
    RhoEtaConnection,
};
pub use distinguished::{
    berwald, cov_deriv_along, h_cov_deriv, tensor_product, transform_distinguished_at, v_cov_deriv,
    AdaptedTensorField, DistinguishedConnection, DistinguishedValues, Valence,
};
pub use structures::{
    almost_product, almost_tangent, apply_endomorphism, endomorphism_section, horizontal_proj, nijenhuis,
    vertical_proj, Endomorphism,
};

use std::ops::{Add, Mul, Sub};

use nalgebra::DVector;

use crate::algebroid::GeneralizedLieAlgebroid;
use crate::error::{ensure_finite, Result};
use crate::field::Field;

/// Natural-base coefficients of a section at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct GhVector {
    pub z: DVector<f64>,
    pub v: DVector<f64>,
}

impl GhVector {
    pub fn new(z: DVector<f64>, v: DVector<f64>) -> Self {
        GhVector { z, v }
    }

    pub fn zeros(p: usize, r: usize) -> Self {
        GhVector { z: DVector::zeros(p), v: DVector::zeros(r) }
    }

    pub fn from_slice(p: usize, c: &[f64]) -> Self {
        GhVector { z: DVector::from_column_slice(&c[..p]), v: DVector::from_column_slice(&c[p..]) }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.z.iter().chain(self.v.iter()).copied().collect()
    }

    /// Max-norm of all coefficients.
    pub fn amax(&self) -> f64 {
        self.z.amax().max(self.v.amax())
    }
}

impl Add for &GhVector {
    type Output = GhVector;
    fn add(self, o: &GhVector) -> GhVector {
        GhVector { z: &self.z + &o.z, v: &self.v + &o.v }
    }
}

impl Sub for &GhVector {
    type Output = GhVector;
    fn sub(self, o: &GhVector) -> GhVector {
        GhVector { z: &self.z - &o.z, v: &self.v - &o.v }
    }
}

impl Mul<f64> for &GhVector {
    type Output = GhVector;
    fn mul(self, s: f64) -> GhVector {
        GhVector { z: &self.z * s, v: &self.v * s }
    }
}

#[derive(Clone, Debug)]
pub struct GhSection {
    m: usize,
    p: usize,
    r: usize,
    coeffs: Field,
}

impl GhSection {
    /// `coeffs` maps bundle coordinates (length `m + r`) to `[Z; Y]` (length `p + r`).
    pub fn new(m: usize, p: usize, r: usize, coeffs: Field) -> Self {
        assert_eq!(coeffs.n_in(), m + r, "section input must be bundle coordinates");
        assert_eq!(coeffs.shape(), [p + r], "section output must have p + r entries");
        GhSection { m, p, r, coeffs }
    }

    pub fn from_fn<F>(m: usize, p: usize, r: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        GhSection::new(m, p, r, Field::new(m + r, &[p + r], f))
    }

    /// Assemble from a horizontal field (shape `[p]`) and a vertical field (shape `[r]`).
    pub fn from_parts(m: usize, z: Field, v: Field) -> Self {
        let p = z.len();
        let r = v.len();
        let (z1, v1) = (z.clone(), v.clone());
        let mut coeffs = Field::new(m + r, &[p + r], move |u| {
            let mut c = z1.eval(u);
            c.extend(v1.eval(u));
            c
        })
        .with_fd(z.fd());
        if z.has_partials() && v.has_partials() {
            let (z2, v2) = (z, v);
            coeffs = coeffs.with_partials(move |u| {
                let dz = z2.partials(u);
                let dv = v2.partials(u);
                let mut d = Vec::with_capacity((m + r) * (p + r));
                for k in 0..m + r {
                    d.extend_from_slice(&dz[k]);
                    d.extend_from_slice(&dv[k]);
                }
                d
            });
        }
        GhSection::new(m, p, r, coeffs)
    }

    pub fn constant(m: usize, z: &[f64], v: &[f64]) -> Self {
        let r = v.len();
        let mut c = z.to_vec();
        c.extend_from_slice(v);
        GhSection::new(m, z.len(), r, Field::constant(m + r, &[z.len() + r], c))
    }

    pub fn zero(m: usize, p: usize, r: usize) -> Self {
        GhSection::new(m, p, r, Field::zeros(m + r, &[p + r]))
    }

    /// `∂̃_α`.
    pub fn horizontal_basis(m: usize, p: usize, r: usize, alpha: usize) -> Self {
        let mut z = vec![0.0; p];
        z[alpha] = 1.0;
        GhSection::constant(m, &z, &vec![0.0; r])
    }

    /// `∂̃̇_a`.
    pub fn vertical_basis(m: usize, p: usize, r: usize, a: usize) -> Self {
        let mut v = vec![0.0; r];
        v[a] = 1.0;
        GhSection::constant(m, &vec![0.0; p], &v)
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
    pub fn coeffs(&self) -> &Field {
        &self.coeffs
    }

    pub fn eval(&self, u: &[f64]) -> GhVector {
        GhVector::from_slice(self.p, &self.coeffs.eval(u))
    }

    /// `f · X` for a scalar bundle field `f`.
    pub fn scaled(&self, f: &Field) -> GhSection {
        let (s, f1) = (self.clone(), f.clone());
        GhSection::new(
            self.m,
            self.p,
            self.r,
            Field::new(self.m + self.r, &[self.p + self.r], move |u| {
                let k = f1.eval_scalar(u);
                s.coeffs.eval(u).into_iter().map(|c| c * k).collect()
            })
            .with_fd(self.coeffs.fd()),
        )
    }

    pub fn add(&self, other: &GhSection) -> GhSection {
        let (a, b) = (self.clone(), other.clone());
        GhSection::new(
            self.m,
            self.p,
            self.r,
            Field::new(self.m + self.r, &[self.p + self.r], move |u| {
                a.coeffs.eval(u).iter().zip(b.coeffs.eval(u)).map(|(x, y)| x + y).collect()
            })
            .with_fd(self.coeffs.fd()),
        )
    }
}

/// Covector coefficients against `(dz̃^α, dỹ^a)` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct GhCovector {
    pub zc: DVector<f64>,
    pub vc: DVector<f64>,
}

impl GhCovector {
    pub fn pair(&self, x: &GhVector) -> f64 {
        self.zc.dot(&x.z) + self.vc.dot(&x.v)
    }
}

/// `ρ̃(Z, Y) = (ρ_h Z, Y)` at base point `x`.
pub fn rho_tilde_value(a: &GeneralizedLieAlgebroid, x: &[f64], xv: &GhVector) -> DVector<f64> {
    let m = a.m();
    let base = a.rho_h(x) * &xv.z;
    let mut out = DVector::zeros(m + xv.v.len());
    out.rows_mut(0, m).copy_from(&base);
    out.rows_mut(m, xv.v.len()).copy_from(&xv.v);
    out
}

pub fn rho_tilde(a: &GeneralizedLieAlgebroid, x: &GhSection, u: &[f64]) -> Result<DVector<f64>> {
    let out = rho_tilde_value(a, &u[..a.m()], &x.eval(u));
    ensure_finite("rho_tilde", u, out.as_slice())?;
    Ok(out)
}

/// `(ρ,η)π!`: the horizontal coefficients.
pub fn pi_bang(x: &GhSection, u: &[f64]) -> DVector<f64> {
    x.eval(u).z
}

/// Bracket of `(ρ,η)TE` in natural-base coefficients.
///
/// F-part: `L_h Z_X Z_Y + ρ̃(X)(Z_Y) − ρ̃(Y)(Z_X)`; vertical part: `ρ̃(X)(Y_Y) − ρ̃(Y)(Y_X)`.
/// Directional derivatives run along the full `ρ̃` images, fibre slots included.
pub fn bracket_gh(a: &GeneralizedLieAlgebroid, x: &GhSection, y: &GhSection, u: &[f64]) -> Result<GhVector> {
    let m = a.m();
    let p = x.p;
    let xb = &u[..m];
    let xv = x.eval(u);
    let yv = y.eval(u);
    let wx = rho_tilde_value(a, xb, &xv);
    let wy = rho_tilde_value(a, xb, &yv);
    let dy = y.coeffs.directional(u, wx.as_slice());
    let dx = x.coeffs.directional(u, wy.as_slice());
    let l = a.l_h(xb);
    let mut out = GhVector::zeros(p, x.r);
    for g in 0..p {
        let mut s = dy[g] - dx[g];
        // pairwise form keeps [X, X] exactly zero
        for al in 0..p {
            for be in al + 1..p {
                let c = 0.5 * (l[[g, al, be]] - l[[g, be, al]]);
                if c != 0.0 {
                    s += c * (xv.z[al] * yv.z[be] - xv.z[be] * yv.z[al]);
                }
            }
        }
        out.z[g] = s;
    }
    for b in 0..x.r {
        out.v[b] = dy[p + b] - dx[p + b];
    }
    ensure_finite("bracket", u, &out.to_vec())?;
    Ok(out)
}

/// Lie bracket of the vector fields `ρ̃X`, `ρ̃Y` on `E`, by finite differences.
pub fn image_bracket(a: &GeneralizedLieAlgebroid, x: &GhSection, y: &GhSection, u: &[f64]) -> DVector<f64> {
    let m = a.m();
    let fx = |q: &[f64]| rho_tilde_value(a, &q[..m], &x.eval(q)).as_slice().to_vec();
    let fy = |q: &[f64]| rho_tilde_value(a, &q[..m], &y.eval(q)).as_slice().to_vec();
    let fd = a.fd();
    let vx = fx(u);
    let vy = fy(u);
    let d1 = fd.directional(fy, u, &vx);
    let d2 = fd.directional(fx, u, &vy);
    DVector::from_iterator(vx.len(), d1.iter().zip(&d2).map(|(p, q)| p - q))
}
