// Minimise a small box-constrained quadratic with the simulated machine and
// check the answer against the brute-force grid oracle.

use itrust::ecim::{run_ecim, EcimConfig, Schedule};
use itrust::oracles::grid_minimize_box;
use itrust::QuadraticModel;
use nalgebra::{DMatrix, DVector};

pub fn run_example() -> itrust::Result<()> {
    let j = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let h = DVector::from_column_slice(&[1.0, -2.0]);
    let model = QuadraticModel::new(j, h, 0.5)?;

    let config = EcimConfig::new(Schedule::Fixed(0.4), 2000).with_seed(7);
    let trace = run_ecim(&model, &config, &DVector::zeros(2))?;
    let oracle = grid_minimize_box(&model, 1e-3)?;

    println!("ECIM best  {:?} E = {:.8}", trace.best_iterate, trace.best_energy);
    println!("grid       {:?} E = {:.8}", oracle.s_star.as_slice(), oracle.value);
    assert!((trace.best_energy - oracle.value).abs() < 1e-6);
    Ok(())
}

#[allow(dead_code)]
fn main() -> itrust::Result<()> {
    run_example()
}
