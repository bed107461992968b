//! Generalized Lie algebroids in a single chart.
//!
//! Index layout: the anchor is an `m × p` array `ρ[i][α] = ρ^i_α`; structure functions are a
//! `p × p × p` array `L[γ][α][β] = L^γ_{αβ}`. Pull-back quantities `ρ∘h` and `L∘h` are
//! evaluated at the base point `x` of a bundle point `u = (x, y)`.

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::fd::Fd;
use crate::field::{matrix_to_row_major, Field};
use crate::geometry::{bracket_gh, image_bracket, rho_tilde_value, GhSection};
use crate::linalg::{array3, condition_number, inverse_field, levi_civita, MAX_CONDITION};

#[derive(Clone, Debug)]
pub struct GeneralizedLieAlgebroid {
    m: usize,
    p: usize,
    anchor: Field,
    structure: Field,
    h_map: Field,
    eta_map: Field,
    fd: Fd,
    rho_h: Field,
    l_h: Field,
}

impl GeneralizedLieAlgebroid {
    pub fn new(m: usize, p: usize, anchor: Field, structure: Field, h_map: Field, eta_map: Field) -> Result<Self> {
        for (what, f, shape) in [
            ("anchor", &anchor, vec![m, p]),
            ("structure", &structure, vec![p, p, p]),
            ("h_map", &h_map, vec![m]),
            ("eta_map", &eta_map, vec![m]),
        ] {
            ensure_dim(&format!("{what} input"), m, f.n_in())?;
            if f.shape() != shape.as_slice() {
                return Err(Error::InvalidArgument(format!("{what} has shape {:?}, expected {shape:?}", f.shape())));
            }
        }
        let fd = Fd::default();
        let rho_h = anchor.compose(&h_map).with_fd(fd);
        let l_h = structure.compose(&h_map).with_fd(fd);
        Ok(GeneralizedLieAlgebroid { m, p, anchor, structure, h_map, eta_map, fd, rho_h, l_h })
    }

    /// Tangent bundle of ℝ^m: ρ = Id, L = 0, h = η = Id.
    pub fn classical(m: usize) -> Self {
        Self::new(
            m,
            m,
            Field::identity_matrix(m, m),
            Field::zeros(m, &[m, m, m]),
            Field::identity(m),
            Field::identity(m),
        )
        .expect("classical algebroid is well formed")
    }

    /// Lie algebra over a point (m = 0) with constant structure constants.
    pub fn lie_algebra(constants: Array3<f64>) -> Self {
        let p = constants.shape()[0];
        let data = constants.iter().copied().collect();
        Self::new(
            0,
            p,
            Field::zeros(0, &[0, p]),
            Field::constant(0, &[p, p, p], data),
            Field::identity(0),
            Field::identity(0),
        )
        .expect("lie algebra is well formed")
    }

    /// so(3) with `L^γ_{αβ} = ε_{αβγ}`.
    pub fn so3() -> Self {
        let mut c = Array3::zeros((3, 3, 3));
        for g in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    c[[g, a, b]] = levi_civita(a, b, g);
                }
            }
        }
        Self::lie_algebra(c)
    }

    pub fn with_fd(mut self, fd: Fd) -> Self {
        self.fd = fd;
        self.rho_h = self.rho_h.with_fd(fd);
        self.l_h = self.l_h.with_fd(fd);
        self
    }

    /// Same algebroid with different structure functions (anchor and maps kept).
    pub fn with_structure(&self, structure: Field) -> Result<Self> {
        let a = Self::new(self.m, self.p, self.anchor.clone(), structure, self.h_map.clone(), self.eta_map.clone())?;
        Ok(a.with_fd(self.fd))
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn fd(&self) -> Fd {
        self.fd
    }
    pub fn anchor(&self) -> &Field {
        &self.anchor
    }
    pub fn structure(&self) -> &Field {
        &self.structure
    }
    pub fn h_map(&self) -> &Field {
        &self.h_map
    }
    pub fn eta_map(&self) -> &Field {
        &self.eta_map
    }

    /// `ρ∘h` as a field on M-coordinates, shape `[m, p]`.
    pub fn rho_h_field(&self) -> &Field {
        &self.rho_h
    }

    /// `L∘h` as a field on M-coordinates, shape `[p, p, p]`.
    pub fn l_h_field(&self) -> &Field {
        &self.l_h
    }

    pub fn rho_h(&self, x: &[f64]) -> DMatrix<f64> {
        if self.m == 0 {
            return DMatrix::zeros(0, self.p);
        }
        self.rho_h.eval_matrix(x)
    }

    pub fn l_h(&self, x: &[f64]) -> Array3<f64> {
        array3((self.p, self.p, self.p), self.l_h.eval(x))
    }
}

/// Pull-back values `(ρ∘h, L∘h)` at a base point.
pub fn pullback_eval(a: &GeneralizedLieAlgebroid, x: &[f64]) -> Result<(DMatrix<f64>, Array3<f64>)> {
    ensure_dim("base point", a.m, x.len())?;
    let rho = a.rho_h(x);
    let l = a.l_h(x);
    ensure_finite("anchor", x, rho.as_slice())?;
    ensure_finite("structure functions", x, l.as_slice().unwrap_or(&[]))?;
    Ok((rho, l))
}

/// Algebroid of a frame `θ` on N: `L^γ_{αβ} = (θ^i_α ∂_iθ^j_β − θ^i_β ∂_iθ^j_α) θ̃^γ_j`.
///
/// `theta` has shape `[m, m]` with `θ[i][α] = θ^i_α`. The frame formula is evaluated at
/// `h(η(κ))` and the anchor is `Dh(η(κ))⁻¹ θ(h(η(κ)))`. `samples` are N-points at which
/// the frame must be invertible.
pub fn structure_from_frame(
    theta: Field,
    h_map: Field,
    eta_map: Field,
    samples: &[Vec<f64>],
) -> Result<GeneralizedLieAlgebroid> {
    let m = theta.n_in();
    if theta.shape() != [m, m] {
        return Err(Error::InvalidArgument(format!("frame has shape {:?}, expected [{m}, {m}]", theta.shape())));
    }
    for s in samples {
        let th = theta.eval_matrix(s);
        let cond = condition_number(&th);
        if !(cond < MAX_CONDITION) {
            return Err(Error::Degenerate { what: "frame".into(), point: s.clone(), cond });
        }
    }
    let k_map = h_map.compose(&eta_map);

    let th = theta.clone();
    let km = k_map.clone();
    let structure = Field::new(m, &[m, m, m], move |kappa| {
        let z = km.eval(kappa);
        frame_structure(&th, &z)
    })
    .with_fd(theta.fd());

    let th = theta.clone();
    let (hm, em) = (h_map.clone(), eta_map.clone());
    let anchor = Field::new(m, &[m, m], move |kappa| {
        let e = em.eval(kappa);
        let z = hm.eval(&e);
        let dh = jacobian_matrix(&hm, &e);
        let t = th.eval_matrix(&z);
        let rho = dh.try_inverse().map(|inv| inv * t).unwrap_or_else(|| DMatrix::from_element(m, m, f64::NAN));
        matrix_to_row_major(&rho)
    })
    .with_fd(theta.fd());

    GeneralizedLieAlgebroid::new(m, m, anchor, structure, h_map, eta_map)
}

fn frame_structure(theta: &Field, z: &[f64]) -> Vec<f64> {
    let m = z.len();
    let th = theta.eval_matrix(z);
    let inv = th.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(m, m, f64::NAN));
    let dth: Vec<DMatrix<f64>> = (0..m).map(|i| theta.partial_matrix(z, i)).collect();
    let mut out = vec![0.0; m * m * m];
    for a in 0..m {
        for b in 0..m {
            // bracket of frame fields θ_a, θ_b in coordinates
            let mut br = DVector::zeros(m);
            for j in 0..m {
                let mut s = 0.0;
                for i in 0..m {
                    s += th[(i, a)] * dth[i][(j, b)] - th[(i, b)] * dth[i][(j, a)];
                }
                br[j] = s;
            }
            let c = &inv * br;
            for g in 0..m {
                out[(g * m + a) * m + b] = c[g];
            }
        }
    }
    out
}

/// `Df(x)` with `D[j][k] = ∂_k f^j`.
pub fn jacobian_matrix(f: &Field, x: &[f64]) -> DMatrix<f64> {
    let n = f.len();
    let parts = f.partials(x);
    DMatrix::from_fn(n, x.len(), |j, k| parts[k][j])
}

/// Section of the pull-back algebroid: coefficients `Z^α(x, y)` against `T_α`.
#[derive(Clone, Debug)]
pub struct PullbackSection {
    pub coeffs: Field,
}

impl PullbackSection {
    pub fn new(coeffs: Field) -> Self {
        PullbackSection { coeffs }
    }

    pub fn constant(m: usize, r: usize, z: &[f64]) -> Self {
        PullbackSection { coeffs: Field::constant(m + r, &[z.len()], z.to_vec()) }
    }

    /// The same coefficients viewed as a section of the generalized tangent bundle with no
    /// vertical part.
    pub fn to_gh(&self, m: usize, r: usize) -> GhSection {
        GhSection::from_parts(m, self.coeffs.clone(), Field::zeros(m + r, &[r]))
    }
}

/// Bracket of pull-back sections: `L_h^γ_{αβ} Z1^α Z2^β + ρ_h(Z1)(Z2^γ) − ρ_h(Z2)(Z1^γ)`,
/// derivatives along the base directions only.
pub fn pullback_bracket(
    a: &GeneralizedLieAlgebroid,
    z1: &PullbackSection,
    z2: &PullbackSection,
    u: &[f64],
) -> Result<DVector<f64>> {
    let m = a.m;
    let p = a.p;
    let x = &u[..m];
    let (rho, l) = pullback_eval(a, x)?;
    let v1 = z1.coeffs.eval_vector(u);
    let v2 = z2.coeffs.eval_vector(u);
    let mut w1 = vec![0.0; u.len()];
    let mut w2 = vec![0.0; u.len()];
    let (r1, r2) = (&rho * &v1, &rho * &v2);
    w1[..m].copy_from_slice(r1.as_slice());
    w2[..m].copy_from_slice(r2.as_slice());
    let d2 = z2.coeffs.directional(u, &w1);
    let d1 = z1.coeffs.directional(u, &w2);
    let mut out = DVector::zeros(p);
    for g in 0..p {
        let mut s = d2[g] - d1[g];
        for al in 0..p {
            for be in 0..p {
                s += l[[g, al, be]] * v1[al] * v2[be];
            }
        }
        out[g] = s;
    }
    ensure_finite("pullback bracket", u, out.as_slice())?;
    Ok(out)
}

/// Max-norm of the cyclic Jacobi sum on the frame sections `(α, β, γ)`.
pub fn jacobi_defect(a: &GeneralizedLieAlgebroid, x: &[f64], probe: (usize, usize, usize)) -> f64 {
    let p = a.p;
    let rho = a.rho_h(x);
    let l = a.l_h(x);
    let (al, be, ga) = probe;
    let mut defect = vec![0.0; p];
    for (i, j, k) in [(al, be, ga), (be, ga, al), (ga, al, be)] {
        if a.m > 0 {
            let w: Vec<f64> = rho.column(i).iter().copied().collect();
            let dl = array3((p, p, p), a.l_h.directional(x, &w));
            for (d, item) in defect.iter_mut().enumerate() {
                *item += dl[[d, j, k]];
            }
        }
        for (d, item) in defect.iter_mut().enumerate() {
            for e in 0..p {
                *item += l[[e, j, k]] * l[[d, i, e]];
            }
        }
    }
    defect.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Max-norm of `ρ̃([X, Y]) − [ρ̃X, ρ̃Y]`, the second bracket taken by finite differences.
pub fn anchor_morphism_defect(a: &GeneralizedLieAlgebroid, u: &[f64], x: &GhSection, y: &GhSection) -> Result<f64> {
    let br = bracket_gh(a, x, y, u)?;
    let lhs = rho_tilde_value(a, &u[..a.m], &br);
    let rhs = image_bracket(a, x, y, u);
    Ok((lhs - rhs).amax())
}

/// Change of fibred charts on `E` together with the frame change `Λ` on `F`.
///
/// `f_matrix` is a field on N-coordinates; composition identifies N- and M-coordinates, as
/// is the case for [`ChartChange::transform_algebroid`] output (h = η = Id).
#[derive(Clone, Debug)]
pub struct ChartChange {
    m: usize,
    r: usize,
    p: usize,
    base_map: Field,
    base_inverse: Field,
    fibre_matrix: Field,
    f_matrix: Field,
}

impl ChartChange {
    pub fn new(base_map: Field, base_inverse: Field, fibre_matrix: Field, f_matrix: Field) -> Result<Self> {
        let m = base_map.n_in();
        let r = fibre_matrix.shape()[0];
        let p = f_matrix.shape()[0];
        ensure_dim("base_map output", m, base_map.len())?;
        ensure_dim("base_inverse input", m, base_inverse.n_in())?;
        ensure_dim("fibre_matrix input", m, fibre_matrix.n_in())?;
        ensure_dim("f_matrix input", m, f_matrix.n_in())?;
        ensure_dim("fibre_matrix columns", r, fibre_matrix.shape()[1])?;
        ensure_dim("f_matrix columns", p, f_matrix.shape()[1])?;
        Ok(ChartChange { m, r, p, base_map, base_inverse, fibre_matrix, f_matrix })
    }

    pub fn identity(m: usize, r: usize, p: usize) -> Self {
        ChartChange {
            m,
            r,
            p,
            base_map: Field::identity(m),
            base_inverse: Field::identity(m),
            fibre_matrix: Field::identity_matrix(m, r),
            f_matrix: Field::identity_matrix(m, p),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn base_map(&self) -> &Field {
        &self.base_map
    }
    pub fn base_inverse(&self) -> &Field {
        &self.base_inverse
    }
    pub fn fibre_matrix(&self) -> &Field {
        &self.fibre_matrix
    }
    pub fn f_matrix(&self) -> &Field {
        &self.f_matrix
    }

    pub fn fibre(&self, x: &[f64]) -> DMatrix<f64> {
        self.fibre_matrix.eval_matrix(x)
    }

    pub fn lambda(&self, kappa: &[f64]) -> DMatrix<f64> {
        self.f_matrix.eval_matrix(kappa)
    }

    /// Both matrices must be well conditioned at `x` (M) and `kappa` (N).
    pub fn check(&self, x: &[f64], kappa: &[f64]) -> Result<()> {
        for (what, mat, pt) in [("fibre matrix", self.fibre(x), x), ("f matrix", self.lambda(kappa), kappa)] {
            let cond = condition_number(&mat);
            if !(cond < MAX_CONDITION) {
                return Err(Error::Degenerate { what: what.into(), point: pt.to_vec(), cond });
            }
        }
        Ok(())
    }

    /// `(x, y) ↦ (φ(x), M(x) y)`.
    pub fn transform_point(&self, u: &[f64]) -> Vec<f64> {
        let (x, y) = u.split_at(self.m);
        let mut out = self.base_map.eval(x);
        let my = self.fibre(x) * DVector::from_column_slice(y);
        out.extend(my.iter());
        out
    }

    pub fn inverse_point(&self, u: &[f64]) -> Vec<f64> {
        let (xp, yp) = u.split_at(self.m);
        let x = self.base_inverse.eval(xp);
        let minv = self.fibre(&x).try_inverse().unwrap_or_else(|| DMatrix::from_element(self.r, self.r, f64::NAN));
        let y = minv * DVector::from_column_slice(yp);
        let mut out = x;
        out.extend(y.iter());
        out
    }

    /// `next ∘ self`.
    pub fn compose(&self, next: &ChartChange) -> ChartChange {
        let base_map = next.base_map.compose(&self.base_map);
        let base_inverse = self.base_inverse.compose(&next.base_inverse);
        let fibre_matrix = matrix_product_field(&next.fibre_matrix.compose(&self.base_map), &self.fibre_matrix);
        let f_matrix = matrix_product_field(&next.f_matrix.compose(&self.base_map), &self.f_matrix);
        ChartChange { m: self.m, r: self.r, p: self.p, base_map, base_inverse, fibre_matrix, f_matrix }
    }

    pub fn inverse(&self) -> ChartChange {
        ChartChange {
            m: self.m,
            r: self.r,
            p: self.p,
            base_map: self.base_inverse.clone(),
            base_inverse: self.base_map.clone(),
            fibre_matrix: inverse_field(&self.fibre_matrix.compose(&self.base_inverse)),
            f_matrix: inverse_field(&self.f_matrix.compose(&self.base_inverse)),
        }
    }

    /// Block lower-triangular change matrix acting on natural-base components `(Z, Y)`:
    /// `[[Λ∘h, 0], [ρ_h^i_α ∂_i(M) y, M]]`.
    pub fn tangent_matrix(&self, a: &GeneralizedLieAlgebroid, u: &[f64]) -> DMatrix<f64> {
        let (m, p, r) = (self.m, self.p, self.r);
        let (x, y) = u.split_at(m);
        let hx = a.h_map().eval(x);
        let rho = a.rho_h(x);
        let mut t = DMatrix::zeros(p + r, p + r);
        t.view_mut((0, 0), (p, p)).copy_from(&self.lambda(&hx));
        t.view_mut((p, p), (r, r)).copy_from(&self.fibre(x));
        let yv = DVector::from_column_slice(y);
        for i in 0..m {
            let dmy = self.fibre_matrix.partial_matrix(x, i) * &yv;
            for al in 0..p {
                for b in 0..r {
                    t[(p + b, al)] += rho[(i, al)] * dmy[b];
                }
            }
        }
        t
    }

    /// The algebroid expressed in the new chart at pull-back level: `h' = η' = Id`,
    /// `ρ' = Dφ ρ_h Λ_h⁻¹` and structure functions of the frame `T'_{α'} = (Λ_h⁻¹)^α_{α'} T_α`.
    pub fn transform_algebroid(&self, a: &GeneralizedLieAlgebroid) -> Result<GeneralizedLieAlgebroid> {
        let (m, p) = (self.m, self.p);
        ensure_dim("chart change fibre rank of F", a.p(), p)?;
        let lam_inv = inverse_field(&self.f_matrix.compose(a.h_map())).with_fd(a.fd());
        let rho_h = a.rho_h_field().clone();
        let phi = self.base_map.clone();
        let inv = self.base_inverse.clone();
        let li = lam_inv.clone();
        let anchor = Field::new(m, &[m, p], move |xp| {
            let x = inv.eval(xp);
            let dphi = jacobian_matrix(&phi, &x);
            let rho = DMatrix::from_row_slice(m, p, &rho_h.eval(&x));
            matrix_to_row_major(&(dphi * rho * li.eval_matrix(&x)))
        })
        .with_fd(a.fd());

        let alg = a.clone();
        let inv = self.base_inverse.clone();
        let li = lam_inv;
        let structure = Field::new(m, &[p, p, p], move |xp| {
            let x = inv.eval(xp);
            let rho = alg.rho_h(&x);
            let l = alg.l_h(&x);
            let linv = li.eval_matrix(&x);
            let lam = linv.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(p, p, f64::NAN));
            // derivatives of Λ⁻¹ along ρ_h of each new frame vector
            let dirs: Vec<DMatrix<f64>> = (0..p)
                .map(|ap| {
                    let w = &rho * linv.column(ap);
                    if m == 0 {
                        DMatrix::zeros(p, p)
                    } else {
                        DMatrix::from_row_slice(p, p, &li.directional(&x, w.as_slice()))
                    }
                })
                .collect();
            let mut out = vec![0.0; p * p * p];
            for ap in 0..p {
                for bp in 0..p {
                    let mut v = DVector::zeros(p);
                    for g in 0..p {
                        let mut s = dirs[ap][(g, bp)] - dirs[bp][(g, ap)];
                        for al in 0..p {
                            for be in 0..p {
                                s += l[[g, al, be]] * linv[(al, ap)] * linv[(be, bp)];
                            }
                        }
                        v[g] = s;
                    }
                    let vp = &lam * v;
                    for gp in 0..p {
                        out[(gp * p + ap) * p + bp] = vp[gp];
                    }
                }
            }
            out
        })
        .with_fd(a.fd());
        Ok(GeneralizedLieAlgebroid::new(m, p, anchor, structure, Field::identity(m), Field::identity(m))?.with_fd(a.fd()))
    }
}

/// Pointwise product of two square-matrix fields on the same domain.
pub(crate) fn matrix_product_field(a: &Field, b: &Field) -> Field {
    let (a1, b1) = (a.clone(), b.clone());
    let rows = a.shape()[0];
    let cols = b.shape()[1];
    let out = Field::new(a.n_in(), &[rows, cols], move |x| matrix_to_row_major(&(a1.eval_matrix(x) * b1.eval_matrix(x))))
        .with_fd(a.fd());
    if a.has_partials() && b.has_partials() {
        let (a2, b2) = (a.clone(), b.clone());
        out.with_partials(move |x| {
            let am = a2.eval_matrix(x);
            let bm = b2.eval_matrix(x);
            let mut d = Vec::new();
            for k in 0..a2.n_in() {
                d.extend(matrix_to_row_major(&(a2.partial_matrix(x, k) * &bm + &am * b2.partial_matrix(x, k))));
            }
            d
        })
    } else {
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_pullback_values() {
        let a = GeneralizedLieAlgebroid::classical(2);
        let (rho, l) = pullback_eval(&a, &[0.3, -1.0]).unwrap();
        assert_eq!(rho, DMatrix::identity(2, 2));
        assert!(l.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn so3_values() {
        let a = GeneralizedLieAlgebroid::so3();
        let (rho, l) = pullback_eval(&a, &[]).unwrap();
        assert_eq!(rho.shape(), (0, 3));
        assert_eq!(l[[2, 0, 1]], 1.0);
        assert_eq!(l[[2, 1, 0]], -1.0);
        assert_eq!(l[[0, 1, 2]], 1.0);
        assert_eq!(l[[1, 0, 2]], -1.0);
    }

    #[test]
    fn non_finite_anchor_is_reported() {
        let anchor = Field::new(1, &[1, 1], |x| vec![1.0 / x[0]]);
        let a = GeneralizedLieAlgebroid::new(1, 1, anchor, Field::zeros(1, &[1, 1, 1]), Field::identity(1), Field::identity(1))
            .unwrap();
        let err = pullback_eval(&a, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0, .. }));
    }

    #[test]
    fn identity_frame_is_abelian() {
        let theta = Field::identity_matrix(2, 2);
        let a = structure_from_frame(theta, Field::identity(2), Field::identity(2), &[vec![0.0, 0.0]]).unwrap();
        let (rho, l) = pullback_eval(&a, &[0.4, 0.1]).unwrap();
        assert!((rho - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert!(l.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn singular_frame_rejected() {
        let theta = Field::new(1, &[1, 1], |x| vec![x[0]]);
        let err = structure_from_frame(theta, Field::identity(1), Field::identity(1), &[vec![0.0]]).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
    }

    #[test]
    fn so3_jacobi_holds() {
        let a = GeneralizedLieAlgebroid::so3();
        assert!(jacobi_defect(&a, &[], (0, 1, 2)) < 1e-12);
    }

    #[test]
    fn identity_chart_change_is_trivial() {
        let cc = ChartChange::identity(2, 2, 2);
        let u = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(cc.transform_point(&u), u.to_vec());
        let a = GeneralizedLieAlgebroid::classical(2);
        assert_eq!(cc.tangent_matrix(&a, &u), DMatrix::identity(4, 4));
    }
}
