//! Mechanical systems on generalized Lie algebroids: structure functions, connections,
//! semisprays and the integration of the associated Euler–Lagrange type equations.
//!
//! Everything is expressed in a single chart. Coefficient functions are [`Field`]s; points
//! of the bundle are flat slices `u = (x, y)` with `x` the base coordinates and `y` the
//! fibre coordinates.

pub mod algebroid;
pub mod dynamics;
pub mod error;
pub mod fd;
pub mod field;
pub mod geometry;
pub mod linalg;
pub mod mechanics;
pub mod presets;

pub use algebroid::{ChartChange, GeneralizedLieAlgebroid};
pub use dynamics::{integrate, Dynamics, LiftedState, Method, Trajectory};
pub use error::{Error, Result};
pub use fd::Fd;
pub use field::Field;
pub use mechanics::{ExternalForce, GhMorphism, LagrangeMechanicalSystem, Lagrangian, MechanicalSystem};
