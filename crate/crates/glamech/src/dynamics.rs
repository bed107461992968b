//! Integration of the Euler–Lagrange type equations, lifts and parallel transport.
//!
//! The state is `(x, y)` with `x` the base point on M. The velocity field is
//! `dx/dt = ρ(h(x)) g(h(x)) y`, `dy/dt = −2(G − ¼F)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;

use crate::algebroid::GeneralizedLieAlgebroid;
use crate::error::{Error, Result};
use crate::geometry::RhoEtaConnection;
use crate::mechanics::{canonical_semispray, energy, mechanical_semispray, GhMorphism, LagrangeMechanicalSystem, MechanicalSystem};

/// Abort threshold on the max-norm of the state.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// A second-order system on the bundle.
pub trait Dynamics: Send + Sync {
    fn algebroid(&self) -> &GeneralizedLieAlgebroid;
    fn gh(&self) -> &GhMorphism;
    fn r(&self) -> usize;
    /// `−2(G − ¼F)` at `u`.
    fn acceleration(&self, u: &[f64]) -> Result<DVector<f64>>;
    /// `E_L` at `u` when a Lagrangian is attached.
    fn energy(&self, u: &[f64]) -> Option<Result<f64>>;

    fn m(&self) -> usize {
        self.algebroid().m()
    }
}

impl Dynamics for LagrangeMechanicalSystem {
    fn algebroid(&self) -> &GeneralizedLieAlgebroid {
        LagrangeMechanicalSystem::algebroid(self)
    }
    fn gh(&self) -> &GhMorphism {
        LagrangeMechanicalSystem::gh(self)
    }
    fn r(&self) -> usize {
        LagrangeMechanicalSystem::r(self)
    }
    fn acceleration(&self, u: &[f64]) -> Result<DVector<f64>> {
        Ok(canonical_semispray(self, u)?.combo)
    }
    fn energy(&self, u: &[f64]) -> Option<Result<f64>> {
        Some(energy(self.lagrangian(), u))
    }
}

impl Dynamics for MechanicalSystem {
    fn algebroid(&self) -> &GeneralizedLieAlgebroid {
        MechanicalSystem::algebroid(self)
    }
    fn gh(&self) -> &GhMorphism {
        MechanicalSystem::gh(self)
    }
    fn r(&self) -> usize {
        MechanicalSystem::r(self)
    }
    fn acceleration(&self, u: &[f64]) -> Result<DVector<f64>> {
        let v = mechanical_semispray(self, u);
        crate::error::ensure_finite("semispray", u, v.as_slice())?;
        Ok(v)
    }
    fn energy(&self, u: &[f64]) -> Option<Result<f64>> {
        self.lagrangian().map(|l| energy(l, u))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftedState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl LiftedState {
    pub fn new(t: f64, x: Vec<f64>, y: Vec<f64>) -> Self {
        LiftedState { t, x, y }
    }

    /// Bundle coordinates `(x, y)`.
    pub fn point(&self) -> Vec<f64> {
        let mut u = self.x.clone();
        u.extend_from_slice(&self.y);
        u
    }
}

/// Named scalar function of `(x, y)` tracked along a trajectory.
#[derive(Clone)]
pub struct Conserved {
    pub name: String,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl Conserved {
    pub fn new<F>(name: &str, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Conserved { name: name.to_string(), f: Arc::new(f) }
    }
}

impl fmt::Debug for Conserved {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Conserved").field("name", &self.name).finish()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub samples: Vec<LiftedState>,
    /// Column names of `diagnostics`.
    pub diagnostic_names: Vec<String>,
    /// One row per sample.
    pub diagnostics: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&LiftedState> {
        self.samples.last()
    }

    /// Time series of a named diagnostic.
    pub fn diagnostic(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.diagnostic_names.iter().position(|n| n == name)?;
        Some(self.diagnostics.iter().map(|row| row[k]).collect())
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(Method::Rk4),
            "euler" => Ok(Method::Euler),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}' (expected rk4 or euler)"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rk4 => "rk4",
            Method::Euler => "euler",
        })
    }
}

/// `(dx, dy)` at a state.
pub fn el_rhs<D: Dynamics + ?Sized>(sys: &D, x: &[f64], y: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut u = x.to_vec();
    u.extend_from_slice(y);
    let yv = DVector::from_column_slice(y);
    let dx = sys.algebroid().rho_h(x) * sys.gh().g_h(x) * yv;
    crate::error::ensure_finite("base velocity", &u, dx.as_slice())?;
    let dy = sys.acceleration(&u)?;
    Ok((dx, dy))
}

fn state_rhs<D: Dynamics + ?Sized>(sys: &D, m: usize, s: &DVector<f64>) -> Result<DVector<f64>> {
    let (dx, dy) = el_rhs(sys, &s.as_slice()[..m], &s.as_slice()[m..])?;
    let mut out = DVector::zeros(s.len());
    out.rows_mut(0, m).copy_from(&dx);
    out.rows_mut(m, dy.len()).copy_from(&dy);
    Ok(out)
}

fn step<F>(f: &F, s: &DVector<f64>, t: f64, h: f64, method: Method) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    match method {
        Method::Euler => Ok(s + f(t, s)? * h),
        Method::Rk4 => {
            let k1 = f(t, s)?;
            let k2 = f(t + 0.5 * h, &(s + &k1 * (0.5 * h)))?;
            let k3 = f(t + 0.5 * h, &(s + &k2 * (0.5 * h)))?;
            let k4 = f(t + h, &(s + &k3 * h))?;
            Ok(s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
        }
    }
}

fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("t1 = {t1} must exceed t0 = {t0}")));
    }
    Ok(((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize)
}

fn fixed_step<F>(
    s0: DVector<f64>,
    m: usize,
    t0: f64,
    t1: f64,
    dt: f64,
    method: Method,
    f: F,
    mut record: impl FnMut(f64, &DVector<f64>) -> Result<()>,
) -> Result<()>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let n = step_count(t0, t1, dt)?;
    let mut s = s0;
    let mut t = t0;
    record(t, &s)?;
    for k in 1..=n {
        let tk = if k == n { t1 } else { t0 + k as f64 * dt };
        let next = step(&f, &s, t, tk - t, method)?;
        if next.iter().any(|v| !v.is_finite()) || next.amax() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                t: tk,
                last_t: t,
                last_x: s.as_slice()[..m].to_vec(),
                last_y: s.as_slice()[m..].to_vec(),
            });
        }
        s = next;
        t = tk;
        record(t, &s)?;
    }
    Ok(())
}

pub fn integrate<D: Dynamics + ?Sized>(sys: &D, state0: &LiftedState, t1: f64, dt: f64, method: Method) -> Result<Trajectory> {
    integrate_with(sys, state0, t1, dt, method, &[])
}

/// Fixed-step integration recording `E_L` (when available) and the given conserved quantities.
pub fn integrate_with<D: Dynamics + ?Sized>(
    sys: &D,
    state0: &LiftedState,
    t1: f64,
    dt: f64,
    method: Method,
    conserved: &[Conserved],
) -> Result<Trajectory> {
    let (m, r) = (sys.m(), sys.r());
    crate::error::ensure_dim("initial base point", m, state0.x.len())?;
    crate::error::ensure_dim("initial fibre point", r, state0.y.len())?;
    let u0 = state0.point();
    crate::error::ensure_finite("initial state", &u0, &u0)?;
    let has_energy = sys.energy(&u0).is_some();
    let mut traj = Trajectory::default();
    if has_energy {
        traj.diagnostic_names.push("E_L".into());
    }
    traj.diagnostic_names.extend(conserved.iter().map(|c| c.name.clone()));
    fixed_step(
        DVector::from_vec(u0),
        m,
        state0.t,
        t1,
        dt,
        method,
        |_, s| state_rhs(sys, m, s),
        |t, s| {
            let u = s.as_slice();
            let mut row = Vec::with_capacity(traj.diagnostic_names.len());
            if has_energy {
                row.push(sys.energy(u).expect("energy available")?);
            }
            row.extend(conserved.iter().map(|c| (c.f)(u)));
            traj.samples.push(LiftedState::new(t, u[..m].to_vec(), u[m..].to_vec()));
            traj.diagnostics.push(row);
            Ok(())
        },
    )?;
    Ok(traj)
}

/// Fixed-step integration of a plain ODE `d(x, y)/dt = rhs(x, y)` on the same grid as
/// [`integrate`]. `m` splits the state into base and fibre parts.
pub fn integrate_ode(
    rhs: &dyn Fn(&[f64]) -> Vec<f64>,
    m: usize,
    state0: &LiftedState,
    t1: f64,
    dt: f64,
    method: Method,
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    let f = |_: f64, s: &DVector<f64>| -> Result<DVector<f64>> { Ok(DVector::from_vec(rhs(s.as_slice()))) };
    fixed_step(DVector::from_vec(state0.point()), m, state0.t, t1, dt, method, f, |t, s| {
        traj.samples.push(LiftedState::new(t, s.as_slice()[..m].to_vec(), s.as_slice()[m..].to_vec()));
        traj.diagnostics.push(Vec::new());
        Ok(())
    })?;
    Ok(traj)
}

/// Max over interior samples of `|dx/dt − ρ(h(x)) g(h(x)) y|`, the time derivative by
/// central differences.
pub fn lift_residual(a: &GeneralizedLieAlgebroid, gh: &GhMorphism, traj: &Trajectory) -> Result<f64> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::InvalidArgument("lift residual needs at least 3 samples".into()));
    }
    if a.m() == 0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for k in 1..n - 1 {
        let (prev, cur, next) = (&traj.samples[k - 1], &traj.samples[k], &traj.samples[k + 1]);
        let h = next.t - prev.t;
        let v = a.rho_h(&cur.x) * gh.g_h(&cur.x) * DVector::from_column_slice(&cur.y);
        for i in 0..a.m() {
            worst = worst.max(((next.x[i] - prev.x[i]) / h - v[i]).abs());
        }
    }
    Ok(worst)
}

/// Integrate `du/dt = −Γ(x(t), u) g(h(x(t))) u` along the base curve `x(t)`.
#[allow(clippy::too_many_arguments)]
pub fn parallel_transport(
    conn: &RhoEtaConnection,
    gh: &GhMorphism,
    base_curve: &dyn Fn(f64) -> Vec<f64>,
    t0: f64,
    u0: &[f64],
    t1: f64,
    dt: f64,
    method: Method,
) -> Result<Trajectory> {
    let m = conn.m();
    crate::error::ensure_dim("transported vector", conn.r(), u0.len())?;
    let rhs = |t: f64, s: &DVector<f64>| -> Result<DVector<f64>> {
        let x = base_curve(t);
        let mut q = x.clone();
        q.extend(s.iter());
        let v = -(conn.gamma(&q) * gh.g_h(&x) * s);
        crate::error::ensure_finite("parallel transport", &q, v.as_slice())?;
        Ok(v)
    };
    let mut traj = Trajectory::default();
    fixed_step(DVector::from_column_slice(u0), 0, t0, t1, dt, method, rhs, |t, s| {
        traj.samples.push(LiftedState::new(t, base_curve(t), s.iter().copied().collect()));
        traj.diagnostics.push(Vec::new());
        Ok(())
    })?;
    let _ = m;
    Ok(traj)
}

/// Piecewise cubic Hermite interpolant of the base path of a trajectory, using the lift
/// velocities `ρ g y` as nodal derivatives.
#[derive(Clone, Debug)]
pub struct HermiteCurve {
    t: Vec<f64>,
    x: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl HermiteCurve {
    pub fn from_trajectory(a: &GeneralizedLieAlgebroid, gh: &GhMorphism, traj: &Trajectory) -> Self {
        let t = traj.times();
        let x = traj.samples.iter().map(|s| s.x.clone()).collect();
        let v = traj
            .samples
            .iter()
            .map(|s| (a.rho_h(&s.x) * gh.g_h(&s.x) * DVector::from_column_slice(&s.y)).iter().copied().collect())
            .collect();
        HermiteCurve { t, x, v }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.t.len();
        let k = match self.t.binary_search_by(|s| s.partial_cmp(&t).expect("finite times")) {
            Ok(i) => return self.x[i].clone(),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let (ta, tb) = (self.t[k], self.t[k + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
        let h10 = s.powi(3) - 2.0 * s * s + s;
        let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
        let h11 = s.powi(3) - s * s;
        (0..self.x[k].len())
            .map(|i| h00 * self.x[k][i] + h10 * h * self.v[k][i] + h01 * self.x[k + 1][i] + h11 * h * self.v[k + 1][i])
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicReport {
    /// Max distance of `x(t)` from the affine chord between the end points.
    pub chord_deviation: f64,
    /// Max drift of the diagnostic named `F`, if recorded.
    pub f_drift: Option<f64>,
    /// Max drift of `E_L`, if recorded.
    pub energy_drift: Option<f64>,
}

fn drift(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc: f64, e| acc.max((e - v[0]).abs()))
}

pub fn geodesic_check(traj: &Trajectory) -> GeodesicReport {
    let first = &traj.samples[0];
    let last = traj.last().expect("non-empty trajectory");
    let span = last.t - first.t;
    let mut dev: f64 = 0.0;
    for s in &traj.samples {
        let lam = (s.t - first.t) / span;
        for i in 0..s.x.len() {
            let chord = first.x[i] + lam * (last.x[i] - first.x[i]);
            dev = dev.max((s.x[i] - chord).abs());
        }
    }
    GeodesicReport {
        chord_deviation: dev,
        f_drift: traj.diagnostic("F").map(|v| drift(&v)),
        energy_drift: traj.diagnostic("E_L").map(|v| drift(&v)),
    }
}
