// A box of half-width δ contains the ball of radius δ, so the machine's box
// minimum can only improve on the exact ball step.

use itrust::ecim::{minimize, EcimConfig, Schedule};
use itrust::oracles::{exact_ball_for_model, grid_minimize_box};
use itrust::verify::{random_instance, InstanceFamily};

pub fn run_example() -> itrust::Result<()> {
    for seed in 0..5 {
        let (model, s0) = random_instance(InstanceFamily::Convex, 2, 0.5, seed)?;
        let l = itrust::linalg::spectral_radius(&model.symmetric_coupling());
        let ecim = minimize(&model, &EcimConfig::new(Schedule::Fixed(1.0 / l), 20_000), &s0)?.best_energy;
        let ball = exact_ball_for_model(&model)?.value;
        let grid = grid_minimize_box(&model, 1e-3)?.value;
        println!("seed {seed}: ecim {ecim:+.6}  ball {ball:+.6}  grid {grid:+.6}  c = {:.4}", -ecim / grid.abs());
        assert!(ecim <= ball + 1e-6);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> itrust::Result<()> {
    run_example()
}
