// Linear convergence of the machine on a strongly convex subproblem, read
// off a semi-log fit of the gap.

use itrust::ecim::{run_ecim, EcimConfig, Schedule};
use itrust::verify::{fit_semilog, random_instance, reference, InstanceFamily};

pub fn run_example() -> itrust::Result<()> {
    let (model, s0) = random_instance(InstanceFamily::StronglyConvex, 2, 0.5, 1)?;
    let r = reference(&model)?;
    let beta = 1.0 / r.constants.lipschitz;
    let trace = run_ecim(&model, &EcimConfig::new(Schedule::Fixed(beta), 200), &s0)?;
    let series: Vec<(f64, f64)> = trace.energies.iter().enumerate().map(|(k, e)| (k as f64, e - r.e_star)).collect();
    let fit = fit_semilog(&series)?;
    println!(
        "log(gap) ~ {:.4}·k + {:.3} (r² = {:.4}, {} points); 1 - βμ = {:.4}",
        fit.slope,
        fit.intercept,
        fit.r2,
        fit.points,
        1.0 - beta * r.constants.mu.unwrap_or(0.0)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> itrust::Result<()> {
    run_example()
}
