//! Mechanical and Lagrange mechanical systems on a generalized Lie algebroid with `E = F`.

mod forms;
mod lagrangian;
mod semispray;

pub use forms::{omega_l, semispray_equation_residual, semispray_equation_residual_with, semispray_transform_check, theta_l};
pub use lagrangian::{
    energy, finsler_validate, hessian_inverse, lagrangian_jet, regularity, FinslerReport, Jet, Lagrangian,
    REGULARITY_TOL, Y_MIN,
};
pub use semispray::{
    canonical_semispray, connection_from_semispray, el_covector, lagrange_connection, liouville, mechanical_connection,
    mechanical_semispray, ring_connection, ring_connection_field, ring_curvature_identity, semispray_section,
    spray_coefficients, spray_deviation, spray_section, SemisprayCoefficients,
};

use nalgebra::DMatrix;

use crate::algebroid::GeneralizedLieAlgebroid;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::RhoEtaConnection;
use crate::linalg::{condition_number, inverse_field, MAX_CONDITION};

/// Locally invertible `(g, h)` morphism. `g` and `g̃` are fields on N-coordinates and are
/// always evaluated at `h(x)`.
#[derive(Clone, Debug)]
pub struct GhMorphism {
    r: usize,
    g: Field,
    g_tilde: Field,
    h: Field,
    g_h: Field,
    g_tilde_h: Field,
}

impl GhMorphism {
    pub fn new(g: Field, g_tilde: Field, h: Field) -> Result<Self> {
        let r = g.shape()[0];
        if g.shape() != [r, r] || g_tilde.shape() != [r, r] {
            return Err(Error::InvalidArgument("g and g̃ must be square r × r fields".into()));
        }
        let g_h = g.compose(&h);
        let g_tilde_h = g_tilde.compose(&h);
        Ok(GhMorphism { r, g, g_tilde, h, g_h, g_tilde_h })
    }

    /// `g̃` computed as the pointwise inverse of `g`.
    pub fn from_g(g: Field, h: Field) -> Result<Self> {
        let gt = inverse_field(&g);
        Self::new(g, gt, h)
    }

    pub fn identity(m: usize, r: usize) -> Self {
        Self::new(Field::identity_matrix(m, r), Field::identity_matrix(m, r), Field::identity(m)).expect("identity morphism")
    }

    pub fn r(&self) -> usize {
        self.r
    }
    pub fn g(&self) -> &Field {
        &self.g
    }
    pub fn g_tilde(&self) -> &Field {
        &self.g_tilde
    }
    pub fn h(&self) -> &Field {
        &self.h
    }
    /// `g∘h` on M-coordinates.
    pub fn g_h_field(&self) -> &Field {
        &self.g_h
    }
    /// `g̃∘h` on M-coordinates.
    pub fn g_tilde_h_field(&self) -> &Field {
        &self.g_tilde_h
    }

    pub fn g_h(&self, x: &[f64]) -> DMatrix<f64> {
        self.g_h.eval_matrix(x)
    }

    /// `g̃(h(x))`, with `g(h(x))` required to be well conditioned.
    pub fn g_tilde_h(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.g_h(x);
        let cond = condition_number(&g);
        if !(cond < MAX_CONDITION) {
            return Err(Error::Degenerate { what: "g".into(), point: x.to_vec(), cond });
        }
        Ok(self.g_tilde_h.eval_matrix(x))
    }

    /// Max-norm of `g̃ g − Id` at `h(x)`.
    pub fn inverse_residual(&self, x: &[f64]) -> f64 {
        let prod = self.g_tilde_h.eval_matrix(x) * self.g_h(x);
        (prod - DMatrix::identity(self.r, self.r)).amax()
    }
}

/// External force `F^a(x, y)`.
#[derive(Clone, Debug)]
pub struct ExternalForce {
    f: Field,
}

impl ExternalForce {
    pub fn new(f: Field) -> Self {
        ExternalForce { f }
    }

    pub fn zero(m: usize, r: usize) -> Self {
        ExternalForce { f: Field::zeros(m + r, &[r]) }
    }

    pub fn field(&self) -> &Field {
        &self.f
    }

    pub fn eval(&self, u: &[f64]) -> nalgebra::DVector<f64> {
        self.f.eval_vector(u)
    }

    /// `∂F^a/∂y^e` as `[a][e]`.
    pub fn dfdy(&self, u: &[f64], m: usize) -> DMatrix<f64> {
        let r = self.f.len();
        let cols: Vec<Vec<f64>> = (0..r).map(|e| self.f.partial(u, m + e)).collect();
        DMatrix::from_fn(r, r, |a, e| cols[e][a])
    }

    /// The field `∂F^a/∂y^e`, shape `[r, r]`.
    pub fn dfdy_field(&self, m: usize) -> Field {
        let r = self.f.len();
        let s = self.clone();
        Field::new(m + r, &[r, r], move |u| crate::field::matrix_to_row_major(&s.dfdy(u, m))).with_fd(self.f.fd())
    }
}

fn check_same_bundle(a: &GeneralizedLieAlgebroid, r: usize, gh: &GhMorphism) -> Result<()> {
    if a.p() != r {
        return Err(Error::Dimension { what: "algebroid rank (E = F requires p = r)".into(), expected: r, got: a.p() });
    }
    if gh.r() != r {
        return Err(Error::Dimension { what: "(g, h) fibre rank".into(), expected: r, got: gh.r() });
    }
    Ok(())
}

/// Mechanical system of the connection-first pipeline: the user supplies `G^a` and `F^a`.
/// An optional Lagrangian is used only for energy diagnostics.
#[derive(Clone, Debug)]
pub struct MechanicalSystem {
    algebroid: GeneralizedLieAlgebroid,
    gh: GhMorphism,
    spray: Field,
    force: ExternalForce,
    lagrangian: Option<Lagrangian>,
}

impl MechanicalSystem {
    /// `spray` houses `G^a` as a field of shape `[r]` on bundle coordinates.
    pub fn new(algebroid: GeneralizedLieAlgebroid, gh: GhMorphism, spray: Field, force: ExternalForce) -> Result<Self> {
        let r = spray.len();
        check_same_bundle(&algebroid, r, &gh)?;
        if spray.n_in() != algebroid.m() + r || force.field().shape() != [r] {
            return Err(Error::InvalidArgument("spray and force must be r-vectors on bundle coordinates".into()));
        }
        Ok(MechanicalSystem { algebroid, gh, spray, force, lagrangian: None })
    }

    /// `G^a` from a connection via the canonical spray of that connection (plus `¼F`).
    pub fn from_connection(
        algebroid: GeneralizedLieAlgebroid,
        gh: GhMorphism,
        conn: &RhoEtaConnection,
        force: ExternalForce,
    ) -> Result<Self> {
        let (a, g, c, f) = (algebroid.clone(), gh.clone(), conn.clone(), force.clone());
        let r = conn.r();
        let spray = Field::new(algebroid.m() + r, &[r], move |u| match spray_coefficients(&a, &c, &g, u) {
            Ok(s) => (0..r).map(|i| 0.5 * s[i] + 0.25 * f.eval(u)[i]).collect(),
            Err(_) => vec![f64::NAN; r],
        });
        Self::new(algebroid, gh, spray, force)
    }

    pub fn with_lagrangian(mut self, l: Lagrangian) -> Self {
        self.lagrangian = Some(l);
        self
    }

    pub fn algebroid(&self) -> &GeneralizedLieAlgebroid {
        &self.algebroid
    }
    pub fn gh(&self) -> &GhMorphism {
        &self.gh
    }
    pub fn spray(&self) -> &Field {
        &self.spray
    }
    pub fn force(&self) -> &ExternalForce {
        &self.force
    }
    pub fn lagrangian(&self) -> Option<&Lagrangian> {
        self.lagrangian.as_ref()
    }
    pub fn m(&self) -> usize {
        self.algebroid.m()
    }
    pub fn r(&self) -> usize {
        self.spray.len()
    }

    /// `−2(G − ¼F)` as a field.
    pub fn combo_field(&self) -> Field {
        let (g, f) = (self.spray.clone(), self.force.clone());
        let r = self.r();
        Field::new(self.m() + r, &[r], move |u| {
            let gv = g.eval(u);
            let fv = f.eval(u);
            (0..r).map(|a| -2.0 * (gv[a] - 0.25 * fv[a])).collect()
        })
        .with_fd(self.spray.fd())
    }
}

/// Lagrange mechanical system: `−2(G − ¼F)` is fixed by the Lagrangian.
#[derive(Clone, Debug)]
pub struct LagrangeMechanicalSystem {
    algebroid: GeneralizedLieAlgebroid,
    gh: GhMorphism,
    lagrangian: Lagrangian,
    force: ExternalForce,
}

impl LagrangeMechanicalSystem {
    pub fn new(
        algebroid: GeneralizedLieAlgebroid,
        gh: GhMorphism,
        lagrangian: Lagrangian,
        force: ExternalForce,
    ) -> Result<Self> {
        let r = lagrangian.r();
        check_same_bundle(&algebroid, r, &gh)?;
        if lagrangian.m() != algebroid.m() {
            return Err(Error::Dimension { what: "Lagrangian base dimension".into(), expected: algebroid.m(), got: lagrangian.m() });
        }
        if force.field().shape() != [r] || force.field().n_in() != algebroid.m() + r {
            return Err(Error::InvalidArgument("force must be an r-vector on bundle coordinates".into()));
        }
        Ok(LagrangeMechanicalSystem { algebroid, gh, lagrangian, force })
    }

    /// Force-free system with the identity morphism.
    pub fn simple(algebroid: GeneralizedLieAlgebroid, lagrangian: Lagrangian) -> Result<Self> {
        let (m, r) = (algebroid.m(), lagrangian.r());
        Self::new(algebroid, GhMorphism::identity(m, r), lagrangian, ExternalForce::zero(m, r))
    }

    pub fn with_force(mut self, force: ExternalForce) -> Self {
        self.force = force;
        self
    }

    pub fn algebroid(&self) -> &GeneralizedLieAlgebroid {
        &self.algebroid
    }
    pub fn gh(&self) -> &GhMorphism {
        &self.gh
    }
    pub fn lagrangian(&self) -> &Lagrangian {
        &self.lagrangian
    }
    pub fn force(&self) -> &ExternalForce {
        &self.force
    }
    pub fn m(&self) -> usize {
        self.algebroid.m()
    }
    pub fn r(&self) -> usize {
        self.lagrangian.r()
    }

    /// `−2(G − ¼F)` as a field; evaluation failures give NaN.
    pub fn combo_field(&self) -> Field {
        let s = self.clone();
        let r = self.r();
        Field::new(self.m() + r, &[r], move |u| match canonical_semispray(&s, u) {
            Ok(c) => c.combo.iter().copied().collect(),
            Err(_) => vec![f64::NAN; r],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_g() {
        let g = Field::new(1, &[2, 2], |x| vec![2.0, x[0], 0.0, 1.0]);
        let gh = GhMorphism::from_g(g, Field::identity(1)).unwrap();
        assert!(gh.inverse_residual(&[0.7]) < 1e-14);
    }

    #[test]
    fn singular_g_rejected() {
        let g = Field::new(1, &[1, 1], |x| vec![x[0]]);
        let gh = GhMorphism::from_g(g, Field::identity(1)).unwrap();
        assert!(matches!(gh.g_tilde_h(&[0.0]), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn rank_mismatch_rejected() {
        let a = GeneralizedLieAlgebroid::classical(2);
        let l = Lagrangian::from_fn(2, 1, |u| u[2] * u[2]);
        assert!(LagrangeMechanicalSystem::simple(a, l).is_err());
    }
}
