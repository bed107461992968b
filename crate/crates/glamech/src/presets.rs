//! Shipped example systems with closed-form reference dynamics.

use std::fmt;
use std::sync::Arc;

use crate::algebroid::{structure_from_frame, GeneralizedLieAlgebroid};
use crate::dynamics::{integrate_ode, Conserved, Dynamics, LiftedState, Method, Trajectory};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mechanics::{ExternalForce, GhMorphism, LagrangeMechanicalSystem, Lagrangian, MechanicalSystem};

pub const NAMES: [&str; 7] = [
    "free_particle",
    "pendulum",
    "damped_pendulum",
    "rigid_body_so3",
    "riemannian_2d",
    "finsler_euclidean",
    "twisted_frame",
];

/// Damping coefficient of `damped_pendulum`.
pub const DAMPING: f64 = 0.5;

/// Principal moments of `rigid_body_so3`.
pub const INERTIA: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Clone, Debug)]
pub enum PresetSystem {
    Lagrange(LagrangeMechanicalSystem),
    Mechanical(MechanicalSystem),
}

impl PresetSystem {
    pub fn dynamics(&self) -> &dyn Dynamics {
        match self {
            PresetSystem::Lagrange(s) => s,
            PresetSystem::Mechanical(s) => s,
        }
    }

    pub fn algebroid(&self) -> &GeneralizedLieAlgebroid {
        self.dynamics().algebroid()
    }

    pub fn gh(&self) -> &GhMorphism {
        self.dynamics().gh()
    }

    pub fn m(&self) -> usize {
        self.dynamics().m()
    }

    pub fn r(&self) -> usize {
        self.dynamics().r()
    }

    pub fn lagrangian(&self) -> Option<&Lagrangian> {
        match self {
            PresetSystem::Lagrange(s) => Some(s.lagrangian()),
            PresetSystem::Mechanical(s) => s.lagrangian(),
        }
    }

    pub fn force(&self) -> &ExternalForce {
        match self {
            PresetSystem::Lagrange(s) => s.force(),
            PresetSystem::Mechanical(s) => s.force(),
        }
    }

    pub fn as_lagrange(&self) -> Option<&LagrangeMechanicalSystem> {
        match self {
            PresetSystem::Lagrange(s) => Some(s),
            PresetSystem::Mechanical(_) => None,
        }
    }

    pub fn as_mechanical(&self) -> Option<&MechanicalSystem> {
        match self {
            PresetSystem::Mechanical(s) => Some(s),
            PresetSystem::Lagrange(_) => None,
        }
    }
}

/// Closed-form right-hand side `(dx, dy)` in the preset's own coordinates.
#[derive(Clone)]
pub struct Oracle {
    pub description: &'static str,
    rhs: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl Oracle {
    fn new<F>(description: &'static str, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Oracle { description, rhs: Arc::new(f) }
    }

    pub fn rhs(&self, u: &[f64]) -> Vec<f64> {
        (self.rhs)(u)
    }

    pub fn reference(&self, m: usize, state0: &LiftedState, t1: f64, dt: f64, method: Method) -> Result<Trajectory> {
        integrate_ode(&|u| self.rhs(u), m, state0, t1, dt, method)
    }
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle").field("description", &self.description).finish()
    }
}

#[derive(Clone, Debug)]
pub struct PresetDescriptor {
    pub name: &'static str,
    pub system: PresetSystem,
    pub oracle: Oracle,
    pub conserved: Vec<Conserved>,
    /// Finsler fundamental function, for Finsler presets.
    pub finsler: Option<Lagrangian>,
    /// Coordinate box `(lo, hi)` for each of the `m + r` bundle coordinates, used for
    /// random sampling.
    pub bounds: Vec<(f64, f64)>,
    pub default_state: LiftedState,
    /// Force-free with a fibre-homogeneous quadratic Lagrangian.
    pub homogeneous: bool,
}

impl PresetDescriptor {
    /// Map a point of the unit cube into `bounds`.
    pub fn sample(&self, unit: &[f64]) -> Vec<f64> {
        self.bounds.iter().zip(unit).map(|((lo, hi), s)| lo + (hi - lo) * s).collect()
    }

    pub fn m(&self) -> usize {
        self.system.m()
    }

    pub fn r(&self) -> usize {
        self.system.r()
    }
}

pub fn build(name: &str) -> Result<PresetDescriptor> {
    match name {
        "free_particle" => Ok(free_particle()),
        "pendulum" => Ok(pendulum()),
        "damped_pendulum" => Ok(damped_pendulum()),
        "rigid_body_so3" => Ok(rigid_body_so3()),
        "riemannian_2d" => Ok(riemannian_2d()),
        "finsler_euclidean" => Ok(finsler_euclidean()),
        "twisted_frame" => Ok(twisted_frame()),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Lagrangian with analytic gradient and Hessian (row-major, `(m + r)²`).
fn analytic_lagrangian(
    m: usize,
    r: usize,
    value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    hessian: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
) -> Lagrangian {
    let n = m + r;
    let grad = Arc::new(gradient);
    let g2 = grad.clone();
    let value = Field::scalar(n, value).with_partials(move |u| g2(u));
    let gradient = Field::new(n, &[n], move |u| grad(u)).with_partials(hessian);
    Lagrangian::new(m, r, value).with_gradient(gradient)
}

fn kinetic(m: usize, r: usize) -> Lagrangian {
    let n = m + r;
    analytic_lagrangian(
        m,
        r,
        move |u| 0.5 * u[m..].iter().map(|v| v * v).sum::<f64>(),
        move |u| {
            let mut g = vec![0.0; n];
            g[m..].copy_from_slice(&u[m..]);
            g
        },
        move |_| {
            let mut h = vec![0.0; n * n];
            for a in m..n {
                h[a * n + a] = 1.0;
            }
            h
        },
    )
}

fn pendulum_lagrangian() -> Lagrangian {
    analytic_lagrangian(
        1,
        1,
        |u| 0.5 * u[1] * u[1] - (1.0 - u[0].cos()),
        |u| vec![-u[0].sin(), u[1]],
        |u| vec![-u[0].cos(), 0.0, 0.0, 1.0],
    )
}

fn lagrange(a: GeneralizedLieAlgebroid, l: Lagrangian) -> PresetSystem {
    PresetSystem::Lagrange(LagrangeMechanicalSystem::simple(a, l).expect("preset dimensions agree"))
}

fn free_particle() -> PresetDescriptor {
    PresetDescriptor {
        name: "free_particle",
        system: lagrange(GeneralizedLieAlgebroid::classical(2), kinetic(2, 2)),
        oracle: Oracle::new("uniform straight-line motion", |u| vec![u[2], u[3], 0.0, 0.0]),
        conserved: vec![Conserved::new("p1", |u| u[2]), Conserved::new("p2", |u| u[3])],
        finsler: None,
        bounds: vec![(-2.0, 2.0); 4],
        default_state: LiftedState::new(0.0, vec![0.0, 0.0], vec![1.0, 0.5]),
        homogeneous: true,
    }
}

fn pendulum() -> PresetDescriptor {
    PresetDescriptor {
        name: "pendulum",
        system: lagrange(GeneralizedLieAlgebroid::classical(1), pendulum_lagrangian()),
        oracle: Oracle::new("x'' = -sin x", |u| vec![u[1], -u[0].sin()]),
        conserved: Vec::new(),
        finsler: None,
        bounds: vec![(-3.0, 3.0), (-2.0, 2.0)],
        default_state: LiftedState::new(0.0, vec![1.0], vec![0.0]),
        homogeneous: false,
    }
}

fn damped_pendulum() -> PresetDescriptor {
    let spray = Field::new(2, &[1], |u| vec![0.5 * u[0].sin()]).with_partials(|u| vec![0.5 * u[0].cos(), 0.0]);
    let force = Field::new(2, &[1], |u| vec![-2.0 * DAMPING * u[1]]).with_partials(|_| vec![0.0, -2.0 * DAMPING]);
    let ms = MechanicalSystem::new(
        GeneralizedLieAlgebroid::classical(1),
        GhMorphism::identity(1, 1),
        spray,
        ExternalForce::new(force),
    )
    .expect("preset dimensions agree")
    .with_lagrangian(pendulum_lagrangian());
    PresetDescriptor {
        name: "damped_pendulum",
        system: PresetSystem::Mechanical(ms),
        oracle: Oracle::new("x'' = -sin x - γ x'", |u| vec![u[1], -u[0].sin() - DAMPING * u[1]]),
        conserved: Vec::new(),
        finsler: None,
        bounds: vec![(-3.0, 3.0), (-2.0, 2.0)],
        default_state: LiftedState::new(0.0, vec![1.0], vec![0.0]),
        homogeneous: false,
    }
}

fn rigid_body_so3() -> PresetDescriptor {
    let [i1, i2, i3] = INERTIA;
    let l = analytic_lagrangian(
        0,
        3,
        move |y| 0.5 * (i1 * y[0] * y[0] + i2 * y[1] * y[1] + i3 * y[2] * y[2]),
        move |y| vec![i1 * y[0], i2 * y[1], i3 * y[2]],
        move |_| vec![i1, 0.0, 0.0, 0.0, i2, 0.0, 0.0, 0.0, i3],
    );
    PresetDescriptor {
        name: "rigid_body_so3",
        system: lagrange(GeneralizedLieAlgebroid::so3(), l),
        oracle: Oracle::new("Euler equations I ω' = (I ω) × ω", move |w| {
            vec![(i2 - i3) / i1 * w[1] * w[2], (i3 - i1) / i2 * w[2] * w[0], (i1 - i2) / i3 * w[0] * w[1]]
        }),
        conserved: vec![Conserved::new("casimir", move |y| {
            (i1 * y[0]).powi(2) + (i2 * y[1]).powi(2) + (i3 * y[2]).powi(2)
        })],
        finsler: None,
        bounds: vec![(-1.5, 1.5); 3],
        default_state: LiftedState::new(0.0, Vec::new(), vec![1.0, 1.0, 1.0]),
        homogeneous: true,
    }
}

/// Metric `diag(1 + x2², 1 + x1²)` and its derivatives `dg[l][i][j] = ∂_l g_ij`.
fn riemannian_metric(x: &[f64]) -> ([[f64; 2]; 2], [[[f64; 2]; 2]; 2]) {
    let g = [[1.0 + x[1] * x[1], 0.0], [0.0, 1.0 + x[0] * x[0]]];
    let dg = [[[0.0, 0.0], [0.0, 2.0 * x[0]]], [[2.0 * x[1], 0.0], [0.0, 0.0]]];
    (g, dg)
}

/// Geodesic acceleration `−Γ^k_ij v^i v^j` from the Christoffel symbols of a 2-d metric.
pub fn christoffel_acceleration(g: [[f64; 2]; 2], dg: [[[f64; 2]; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let gi = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
    let mut acc = [0.0; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut c = 0.0;
                for l in 0..2 {
                    c += 0.5 * gi[k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
                }
                acc[k] -= c * v[i] * v[j];
            }
        }
    }
    acc
}

fn riemannian_2d() -> PresetDescriptor {
    let l = analytic_lagrangian(
        2,
        2,
        |u| 0.5 * ((1.0 + u[1] * u[1]) * u[2] * u[2] + (1.0 + u[0] * u[0]) * u[3] * u[3]),
        |u| {
            vec![
                u[0] * u[3] * u[3],
                u[1] * u[2] * u[2],
                (1.0 + u[1] * u[1]) * u[2],
                (1.0 + u[0] * u[0]) * u[3],
            ]
        },
        |u| {
            let (x1, x2, y1, y2) = (u[0], u[1], u[2], u[3]);
            vec![
                y2 * y2, 0.0, 0.0, 2.0 * x1 * y2,
                0.0, y1 * y1, 2.0 * x2 * y1, 0.0,
                0.0, 2.0 * x2 * y1, 1.0 + x2 * x2, 0.0,
                2.0 * x1 * y2, 0.0, 0.0, 1.0 + x1 * x1,
            ]
        },
    );
    PresetDescriptor {
        name: "riemannian_2d",
        system: lagrange(GeneralizedLieAlgebroid::classical(2), l),
        oracle: Oracle::new("geodesic equations with Christoffel symbols", |u| {
            let (g, dg) = riemannian_metric(&u[..2]);
            let a = christoffel_acceleration(g, dg, [u[2], u[3]]);
            vec![u[2], u[3], a[0], a[1]]
        }),
        conserved: Vec::new(),
        finsler: None,
        bounds: vec![(-1.0, 1.0); 4],
        default_state: LiftedState::new(0.0, vec![0.2, -0.1], vec![0.7, 0.4]),
        homogeneous: true,
    }
}

fn finsler_euclidean() -> PresetDescriptor {
    let f = Lagrangian::new(
        2,
        2,
        Field::scalar(4, |u| (u[2] * u[2] + u[3] * u[3]).sqrt()).with_partials(|u| {
            let n = (u[2] * u[2] + u[3] * u[3]).sqrt();
            vec![0.0, 0.0, u[2] / n, u[3] / n]
        }),
    )
    .non_smooth_at_zero();
    let norm = |u: &[f64]| (u[2] * u[2] + u[3] * u[3]).sqrt();
    PresetDescriptor {
        name: "finsler_euclidean",
        system: lagrange(GeneralizedLieAlgebroid::classical(2), kinetic(2, 2)),
        oracle: Oracle::new("straight lines", |u| vec![u[2], u[3], 0.0, 0.0]),
        conserved: vec![Conserved::new("F", norm)],
        finsler: Some(f),
        bounds: vec![(-2.0, 2.0), (-2.0, 2.0), (0.3, 1.5), (-1.5, 1.5)],
        default_state: LiftedState::new(0.0, vec![0.0, 0.0], vec![1.0, 1.0]),
        homogeneous: true,
    }
}

/// Frame `θ = diag(1, 1 + x1)` on ℝ².
pub fn twisted_theta() -> Field {
    Field::new(2, &[2, 2], |x| vec![1.0, 0.0, 0.0, 1.0 + x[0]])
        .with_partials(|_| vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
}

fn twisted_frame() -> PresetDescriptor {
    let a = structure_from_frame(twisted_theta(), Field::identity(2), Field::identity(2), &[vec![0.3, -0.2]])
        .expect("frame is invertible at the sample");
    let l = analytic_lagrangian(
        2,
        2,
        |u| 0.5 * (u[2] * u[2] + u[3] * u[3]) - 0.5 * u[0] * u[0],
        |u| vec![-u[0], 0.0, u[2], u[3]],
        |_| {
            let mut h = vec![0.0; 16];
            h[0] = -1.0;
            h[10] = 1.0;
            h[15] = 1.0;
            h
        },
    );
    PresetDescriptor {
        name: "twisted_frame",
        system: lagrange(a, l),
        // classical velocities v = θ y with L = ½v1² + ½v2²/(1+x1)² − ½x1²
        oracle: Oracle::new("classical Euler-Lagrange in v = θ y", |u| {
            let s = 1.0 + u[0];
            vec![u[2], s * u[3], -u[3] * u[3] / s - u[0], u[2] * u[3] / s]
        }),
        conserved: vec![Conserved::new("p2", |u| u[3] / (1.0 + u[0]))],
        finsler: None,
        bounds: vec![(-0.5, 0.5), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        default_state: LiftedState::new(0.0, vec![0.3, -0.2], vec![0.5, 0.4]),
        homogeneous: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds() {
        for n in NAMES {
            let p = build(n).unwrap();
            assert_eq!(p.name, n);
            assert_eq!(p.bounds.len(), p.m() + p.r());
        }
        assert!(matches!(build("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn oracle_matches_system_at_default_state() {
        for n in NAMES {
            let p = build(n).unwrap();
            let s = &p.default_state;
            let (dx, dy) = crate::dynamics::el_rhs(p.system.dynamics(), &s.x, &s.y).unwrap();
            let o = p.oracle.rhs(&s.point());
            let got: Vec<f64> = dx.iter().chain(dy.iter()).copied().collect();
            for (g, e) in got.iter().zip(&o) {
                assert!((g - e).abs() < 1e-8, "{n}: {got:?} vs {o:?}");
            }
        }
    }
}
