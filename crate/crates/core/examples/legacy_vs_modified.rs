// The original clipped machine update against the projected-gradient form
// used for trust-region subproblems.

use itrust::ecim::{ecim_step, legacy_pmim_step, LEGACY_CLIP};
use itrust::QuadraticModel;
use nalgebra::{DMatrix, DVector};

pub fn run_example() -> itrust::Result<()> {
    let j = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 0.8]);
    let zero = DVector::zeros(2);
    let model = QuadraticModel::new(j.clone(), zero.clone(), LEGACY_CLIP)?;

    // Inside the linear region with α = 1 and no field the two coincide.
    let s = DVector::from_column_slice(&[0.2, -0.1]);
    let legacy = legacy_pmim_step(&j, &s, 1.0, 0.1, &zero, LEGACY_CLIP)?;
    let modern = ecim_step(&model, &s, 0.1, &zero)?;
    println!("interior: legacy {:?}, projected {:?}", legacy.as_slice(), modern.as_slice());

    // Past the clip the legacy machine zeroes the spin; the projection keeps it on the face.
    let s = DVector::from_column_slice(&[0.45, 0.0]);
    let legacy = legacy_pmim_step(&j, &s, 1.0, 0.1, &zero, LEGACY_CLIP)?;
    let modern = ecim_step(&model, &s, 0.1, &zero)?;
    println!("clipped:  legacy {:?}, projected {:?}", legacy.as_slice(), modern.as_slice());
    Ok(())
}

#[allow(dead_code)]
fn main() -> itrust::Result<()> {
    run_example()
}
