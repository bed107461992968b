//! Distinguished linear connections and covariant derivatives of adapted tensor fields.
//!
//! Tensor coefficients are dense arrays whose axes come in the order: horizontal
//! contravariant, horizontal covariant, vertical contravariant, vertical covariant.
//! Horizontal axes have extent `p`, vertical axes extent `r`.

use nalgebra::DMatrix;
use ndarray::{Array3, ArrayD, IxDyn};

use super::{rho_tilde_value, GhSection, GhVector, RhoEtaConnection};
use crate::algebroid::{ChartChange, GeneralizedLieAlgebroid};
use crate::error::{ensure_finite, Error, Result};
use crate::field::Field;
use crate::linalg::{array3, invert};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Valence {
    pub hc: usize,
    pub hco: usize,
    pub vc: usize,
    pub vco: usize,
}

impl Valence {
    pub const fn new(hc: usize, hco: usize, vc: usize, vco: usize) -> Self {
        Valence { hc, hco, vc, vco }
    }

    pub fn rank(&self) -> usize {
        self.hc + self.hco + self.vc + self.vco
    }

    pub fn shape(&self, p: usize, r: usize) -> Vec<usize> {
        let mut s = vec![p; self.hc + self.hco];
        s.extend(std::iter::repeat_n(r, self.vc + self.vco));
        s
    }
}

#[derive(Clone, Debug)]
pub struct AdaptedTensorField {
    m: usize,
    p: usize,
    r: usize,
    valence: Valence,
    coeffs: Field,
}

impl AdaptedTensorField {
    pub fn new(m: usize, p: usize, r: usize, valence: Valence, coeffs: Field) -> Result<Self> {
        if coeffs.n_in() != m + r {
            return Err(Error::Dimension { what: "tensor input".into(), expected: m + r, got: coeffs.n_in() });
        }
        let shape = valence.shape(p, r);
        if coeffs.shape() != shape.as_slice() {
            return Err(Error::InvalidArgument(format!(
                "tensor of valence {valence:?} needs shape {shape:?}, got {:?}",
                coeffs.shape()
            )));
        }
        Ok(AdaptedTensorField { m, p, r, valence, coeffs })
    }

    pub fn scalar(m: usize, p: usize, r: usize, f: Field) -> Result<Self> {
        AdaptedTensorField::new(m, p, r, Valence::default(), f)
    }

    /// `δ^α_β` with valence (1, 1, 0, 0).
    pub fn kronecker_h(m: usize, p: usize, r: usize) -> Self {
        AdaptedTensorField::new(m, p, r, Valence::new(1, 1, 0, 0), Field::identity_matrix(m + r, p)).expect("valid shape")
    }

    /// `δ^a_b` with valence (0, 0, 1, 1).
    pub fn kronecker_v(m: usize, p: usize, r: usize) -> Self {
        AdaptedTensorField::new(m, p, r, Valence::new(0, 0, 1, 1), Field::identity_matrix(m + r, r)).expect("valid shape")
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }
    pub fn coeffs(&self) -> &Field {
        &self.coeffs
    }
    pub fn shape(&self) -> Vec<usize> {
        self.valence.shape(self.p, self.r)
    }

    pub fn eval(&self, u: &[f64]) -> ArrayD<f64> {
        self.to_array(self.coeffs.eval(u))
    }

    fn to_array(&self, v: Vec<f64>) -> ArrayD<f64> {
        ArrayD::from_shape_vec(IxDyn(&self.shape()), v).expect("tensor shape")
    }
}

/// `S ⊗ T` with axes regrouped into the canonical order.
pub fn tensor_product(s: &AdaptedTensorField, t: &AdaptedTensorField) -> AdaptedTensorField {
    let (vs, vt) = (s.valence, t.valence);
    let valence = Valence::new(vs.hc + vt.hc, vs.hco + vt.hco, vs.vc + vt.vc, vs.vco + vt.vco);
    let rs = vs.rank();
    let mut perm = Vec::with_capacity(valence.rank());
    let mut off_s = 0;
    let mut off_t = rs;
    for (ns, nt) in [(vs.hc, vt.hc), (vs.hco, vt.hco), (vs.vc, vt.vc), (vs.vco, vt.vco)] {
        perm.extend(off_s..off_s + ns);
        perm.extend(off_t..off_t + nt);
        off_s += ns;
        off_t += nt;
    }
    let (s1, t1) = (s.clone(), t.clone());
    let shape = valence.shape(s.p, s.r);
    let f = Field::new(s.m + s.r, &shape, move |u| {
        let a = s1.eval(u);
        let b = t1.eval(u);
        let mut outer_shape = a.shape().to_vec();
        outer_shape.extend_from_slice(b.shape());
        let mut data = Vec::with_capacity(a.len() * b.len());
        for x in a.iter() {
            for y in b.iter() {
                data.push(x * y);
            }
        }
        let outer = ArrayD::from_shape_vec(IxDyn(&outer_shape), data).expect("outer shape");
        outer.permuted_axes(IxDyn(&perm)).iter().copied().collect()
    })
    .with_fd(s.coeffs.fd());
    AdaptedTensorField::new(s.m, s.p, s.r, valence, f).expect("product shape")
}

/// Pointwise values of the four blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct DistinguishedValues {
    /// `H^α_{βγ}` as `[α][β][γ]`.
    pub hh: Array3<f64>,
    /// `H^a_{bγ}` as `[a][b][γ]`.
    pub hv: Array3<f64>,
    /// `V^α_{βc}` as `[α][β][c]`.
    pub vh: Array3<f64>,
    /// `V^a_{bc}` as `[a][b][c]`.
    pub vv: Array3<f64>,
}

/// Distinguished linear connection `(H, V)` together with the nonlinear connection whose
/// adapted frame defines the horizontal directions.
#[derive(Clone, Debug)]
pub struct DistinguishedConnection {
    conn: RhoEtaConnection,
    hh: Field,
    hv: Field,
    vh: Field,
    vv: Field,
}

impl DistinguishedConnection {
    pub fn new(conn: RhoEtaConnection, hh: Field, hv: Field, vh: Field, vv: Field) -> Result<Self> {
        let (m, p, r) = (conn.m(), conn.p(), conn.r());
        for (what, f, shape) in [
            ("Hh", &hh, [p, p, p]),
            ("Hv", &hv, [r, r, p]),
            ("Vh", &vh, [p, p, r]),
            ("Vv", &vv, [r, r, r]),
        ] {
            if f.n_in() != m + r || f.shape() != shape {
                return Err(Error::InvalidArgument(format!("{what} block must have shape {shape:?} on bundle coordinates")));
            }
        }
        Ok(DistinguishedConnection { conn, hh, hv, vh, vv })
    }

    pub fn connection(&self) -> &RhoEtaConnection {
        &self.conn
    }

    pub fn values(&self, u: &[f64]) -> DistinguishedValues {
        let (p, r) = (self.conn.p(), self.conn.r());
        DistinguishedValues {
            hh: array3((p, p, p), self.hh.eval(u)),
            hv: array3((r, r, p), self.hv.eval(u)),
            vh: array3((p, p, r), self.vh.eval(u)),
            vv: array3((r, r, r), self.vv.eval(u)),
        }
    }

    /// Normal when `E = F`, `Hh = Hv` and `Vh = Vv` at `u`.
    pub fn is_normal(&self, u: &[f64], tol: f64) -> bool {
        if self.conn.p() != self.conn.r() {
            return false;
        }
        let v = self.values(u);
        let close = |a: &Array3<f64>, b: &Array3<f64>| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol);
        close(&v.hh, &v.hv) && close(&v.vh, &v.vv)
    }
}

/// Berwald connection: `Hh = Hv = ∂Γ^a_γ/∂y^b`, `Vh = Vv = 0`.
pub fn berwald(conn: &RhoEtaConnection) -> Result<DistinguishedConnection> {
    let (m, p, r) = (conn.m(), conn.p(), conn.r());
    if p != r {
        return Err(Error::InvalidArgument("Berwald connection requires p = r".into()));
    }
    let c = conn.clone();
    let h = Field::new(m + r, &[r, r, p], move |u| {
        let mut out = vec![0.0; r * r * p];
        for b in 0..r {
            let d = c.dgamma_dy(u, b);
            for a in 0..r {
                for g in 0..p {
                    out[(a * r + b) * p + g] = d[(a, g)];
                }
            }
        }
        out
    })
    .with_fd(conn.field().fd());
    DistinguishedConnection::new(conn.clone(), h.clone(), h, Field::zeros(m + r, &[p, p, r]), Field::zeros(m + r, &[r, r, r]))
}

/// Add `sign · Σ_j K(i, j) T[.., j, ..]` along `axis`, where `K = mat` for a contravariant
/// slot and `K = matᵀ` for a covariant one.
fn correction(out: &mut ArrayD<f64>, t: &ArrayD<f64>, axis: usize, mat: &DMatrix<f64>, contravariant: bool) {
    let sign = if contravariant { 1.0 } else { -1.0 };
    let n = mat.nrows();
    for (idx, val) in out.indexed_iter_mut() {
        let i = idx[axis];
        let mut probe = idx.clone();
        let mut s = 0.0;
        for j in 0..n {
            let k = if contravariant { mat[(i, j)] } else { mat[(j, i)] };
            if k != 0.0 {
                probe[axis] = j;
                s += k * t[&probe];
            }
        }
        *val += sign * s;
    }
}

fn slice_last(a: &Array3<f64>, k: usize) -> DMatrix<f64> {
    let s = a.shape();
    DMatrix::from_fn(s[0], s[1], |i, j| a[[i, j, k]])
}

fn apply_corrections(out: &mut ArrayD<f64>, t: &ArrayD<f64>, v: Valence, hmat: &DMatrix<f64>, vmat: &DMatrix<f64>) {
    let mut axis = 0;
    for (n, mat, contra) in [(v.hc, hmat, true), (v.hco, hmat, false), (v.vc, vmat, true), (v.vco, vmat, false)] {
        for _ in 0..n {
            correction(out, t, axis, mat, contra);
            axis += 1;
        }
    }
}

/// `T_{…|γ}`: derivative along `ρ̃(δ̃_γ)` plus `H` corrections.
pub fn h_cov_deriv(
    a: &GeneralizedLieAlgebroid,
    dconn: &DistinguishedConnection,
    t: &AdaptedTensorField,
    gamma: usize,
    u: &[f64],
) -> Result<ArrayD<f64>> {
    let m = t.m;
    let conn = &dconn.conn;
    let frame = super::adapted_frame(conn, gamma, u);
    let dir = rho_tilde_value(a, &u[..m], &frame);
    let mut out = t.to_array(t.coeffs.directional(u, dir.as_slice()));
    let tv = t.eval(u);
    let vals = dconn.values(u);
    apply_corrections(&mut out, &tv, t.valence, &slice_last(&vals.hh, gamma), &slice_last(&vals.hv, gamma));
    ensure_finite("h-covariant derivative", u, out.as_slice().unwrap_or(&[]))?;
    Ok(out)
}

/// `T_{…}|_c`: plain vertical partial plus `V` corrections.
pub fn v_cov_deriv(
    _a: &GeneralizedLieAlgebroid,
    dconn: &DistinguishedConnection,
    t: &AdaptedTensorField,
    c: usize,
    u: &[f64],
) -> Result<ArrayD<f64>> {
    let mut out = t.to_array(t.coeffs.partial(u, t.m + c));
    let tv = t.eval(u);
    let vals = dconn.values(u);
    apply_corrections(&mut out, &tv, t.valence, &slice_last(&vals.vh, c), &slice_last(&vals.vv, c));
    ensure_finite("v-covariant derivative", u, out.as_slice().unwrap_or(&[]))?;
    Ok(out)
}

/// `D_X T = Z^γ T_{|γ} + Y^c T|_c` with `(Z, Y)` the adapted coefficients of `X`.
pub fn cov_deriv_along(
    a: &GeneralizedLieAlgebroid,
    dconn: &DistinguishedConnection,
    x: &GhSection,
    t: &AdaptedTensorField,
    u: &[f64],
) -> Result<ArrayD<f64>> {
    let xv: GhVector = x.eval(u);
    let g = dconn.conn.gamma(u);
    let yad = &xv.v + &g * &xv.z;
    let mut out = ArrayD::zeros(IxDyn(&t.shape()));
    for ga in 0..t.p {
        if xv.z[ga] != 0.0 {
            out = out + h_cov_deriv(a, dconn, t, ga, u)? * xv.z[ga];
        }
    }
    for c in 0..t.r {
        if yad[c] != 0.0 {
            out = out + v_cov_deriv(a, dconn, t, c, u)? * yad[c];
        }
    }
    Ok(out)
}

/// Components of `dconn` in the target chart of `cc`, evaluated at `cc(u)` from data at `u`.
///
/// `Hh' = Λ[ρ̃(δ̃_γ)(Λ⁻¹) + Hh Λ⁻¹]Λ⁻¹`, `Hv' = M[ρ̃(δ̃_γ)(M⁻¹) + Hv M⁻¹]Λ⁻¹`,
/// `Vh' = Λ Vh Λ⁻¹ M⁻¹`, `Vv' = M Vv M⁻¹ M⁻¹`, with `Λ` taken at `h(x)`.
pub fn transform_distinguished_at(
    a: &GeneralizedLieAlgebroid,
    dconn: &DistinguishedConnection,
    cc: &ChartChange,
    u: &[f64],
) -> Result<DistinguishedValues> {
    let conn = &dconn.conn;
    let (m, p, r) = (conn.m(), conn.p(), conn.r());
    let x = &u[..m];
    let hx = a.h_map().eval(x);
    cc.check(x, &hx)?;
    let mm = cc.fibre(x);
    let mi = invert("fibre matrix", x, &mm)?;
    let lam = cc.lambda(&hx);
    let li = invert("f matrix", &hx, &lam)?;
    let rho = a.rho_h(x);
    let li_field = crate::linalg::inverse_field(&cc.f_matrix().compose(a.h_map()));
    let mi_field = crate::linalg::inverse_field(cc.fibre_matrix());
    let dir = |f: &Field, ga: usize, n: usize| -> DMatrix<f64> {
        if m == 0 {
            return DMatrix::zeros(n, n);
        }
        let w: Vec<f64> = rho.column(ga).iter().copied().collect();
        DMatrix::from_row_slice(n, n, &f.directional(x, &w))
    };
    let v = dconn.values(u);

    // inner[γ] = ρ̃(δ̃_γ)(K⁻¹) + H[:, :, γ] K⁻¹, then outer K · inner · Λ⁻¹ over γ
    let h_block = |h: &Array3<f64>, k: &DMatrix<f64>, ki: &DMatrix<f64>, kf: &Field, n: usize| -> Array3<f64> {
        let inner: Vec<DMatrix<f64>> = (0..p).map(|ga| k * (dir(kf, ga, n) + slice_last(h, ga) * ki)).collect();
        let mut out = Array3::zeros((n, n, p));
        for gp in 0..p {
            for ga in 0..p {
                let c = li[(ga, gp)];
                if c == 0.0 {
                    continue;
                }
                for i in 0..n {
                    for j in 0..n {
                        out[[i, j, gp]] += inner[ga][(i, j)] * c;
                    }
                }
            }
        }
        out
    };
    let v_block = |vb: &Array3<f64>, k: &DMatrix<f64>, ki: &DMatrix<f64>, n: usize| -> Array3<f64> {
        let mut out = Array3::zeros((n, n, r));
        for cp in 0..r {
            for c in 0..r {
                let w = mi[(c, cp)];
                if w == 0.0 {
                    continue;
                }
                let s = k * slice_last(vb, c) * ki;
                for i in 0..n {
                    for j in 0..n {
                        out[[i, j, cp]] += s[(i, j)] * w;
                    }
                }
            }
        }
        out
    };
    let out = DistinguishedValues {
        hh: h_block(&v.hh, &lam, &li, &li_field, p),
        hv: h_block(&v.hv, &mm, &mi, &mi_field, r),
        vh: v_block(&v.vh, &lam, &li, p),
        vv: v_block(&v.vv, &mm, &mi, r),
    };
    for (what, arr) in [("Hh'", &out.hh), ("Hv'", &out.hv), ("Vh'", &out.vh), ("Vv'", &out.vv)] {
        ensure_finite(what, u, arr.as_slice().unwrap_or(&[]))?;
    }
    Ok(out)
}
