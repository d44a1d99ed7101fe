// Diagonal trust-region scaling on a badly scaled quadratic: the machine
// needs far fewer steps per subproblem in the rescaled coordinates.

use itrust::objectives::find_problem;
use itrust::trust_region::ScalingRule;
use itrust::{itrust, TrustRegionConfig};

pub fn run_example() -> itrust::Result<()> {
    let problem = find_problem("illscaled").expect("suite problem");
    for (label, scaling) in [("none", ScalingRule::None), ("hessian-diagonal", ScalingRule::HessianDiagonal { floor: 1e-8 })] {
        let config = TrustRegionConfig { scaling, ..Default::default() };
        let trace = itrust(&problem.objective, &config, &problem.start)?;
        let machine_steps: usize = trace.records.iter().map(|r| r.ecim_iterations).sum();
        println!(
            "{label:>16}: {} outer iterations, {machine_steps} machine steps, |grad| = {:.2e}",
            trace.iterations(),
            trace.grad_norm
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> itrust::Result<()> {
    run_example()
}
