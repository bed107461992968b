//! Free rigid body on so(3), integrated with finite-difference jets of a user Lagrangian.

use glamech::mechanics::{canonical_semispray, lagrange_connection};
use glamech::{integrate, GeneralizedLieAlgebroid, LagrangeMechanicalSystem, Lagrangian, LiftedState, Method};

fn main() -> glamech::Result<()> {
    let inertia = [1.0, 2.0, 3.0];
    let l = Lagrangian::from_fn(0, 3, move |y| 0.5 * (0..3).map(|i| inertia[i] * y[i] * y[i]).sum::<f64>());
    let sys = LagrangeMechanicalSystem::simple(GeneralizedLieAlgebroid::so3(), l)?;

    let u = [1.0, 1.0, 1.0];
    println!("combo at {u:?}: {:?}", canonical_semispray(&sys, &u)?.combo.as_slice());
    println!("Gamma:\n{}", lagrange_connection(&sys).gamma(&u));

    let traj = integrate(&sys, &LiftedState::new(0.0, vec![], u.to_vec()), 10.0, 1e-3, Method::Rk4)?;
    let e = traj.diagnostic("E_L").unwrap_or_default();
    let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max);
    println!("{} samples, final ω = {:?}, energy drift {drift:.2e}", traj.len(), traj.last().map(|s| &s.y));
    Ok(())
}
