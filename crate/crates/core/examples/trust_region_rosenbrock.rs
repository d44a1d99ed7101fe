// iTrust on the Rosenbrock function with the machine and with the exact
// ball solver as subproblem backends.

use itrust::objectives::rosenbrock;
use itrust::{itrust, SubproblemSolver, TrustRegionConfig};
use nalgebra::DVector;

pub fn run_example() -> itrust::Result<()> {
    let f = rosenbrock(2, 1.0, 100.0);
    let start = DVector::from_column_slice(&[-1.2, 1.0]);
    let machine = TrustRegionConfig::default();
    let exact = TrustRegionConfig::default().with_solver(SubproblemSolver::ExactBall);

    for (label, config) in [("ecim", machine), ("exact-ball", exact)] {
        let trace = itrust(&f, &config, &start)?;
        println!(
            "{label:>10}: {} iterations, {} accepted, theta = {:?}, |grad| = {:.2e}",
            trace.iterations(),
            trace.accepted_steps(),
            trace.theta,
            trace.grad_norm
        );
        assert!((trace.final_theta() - DVector::from_element(2, 1.0)).norm() < 1e-4);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> itrust::Result<()> {
    run_example()
}
