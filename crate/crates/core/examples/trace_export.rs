// Write machine and trust-region traces as CSV and JSON.

use std::fs;

use itrust::ecim::{run_ecim, EcimConfig, Schedule};
use itrust::objectives::find_problem;
use itrust::{itrust, TrustRegionConfig};

pub fn run_example() -> itrust::Result<()> {
    let dir = std::env::temp_dir().join(format!("itrust-trace-export-{}", std::process::id()));
    fs::create_dir_all(&dir)?;

    let problem = find_problem("quadratic2").expect("suite problem");
    let trace = itrust(&problem.objective, &TrustRegionConfig::default(), &problem.start)?;
    trace.write_csv(fs::File::create(dir.join("outer.csv"))?)?;
    fs::write(dir.join("outer.json"), trace.to_json()?)?;

    let model = itrust::build_subproblem(&problem.objective, &problem.start, 0.5, None)?;
    let inner = run_ecim(&model, &EcimConfig::new(Schedule::Decreasing(0.5), 50).with_seed(3), &problem.start)?;
    inner.write_csv(fs::File::create(dir.join("inner.csv"))?)?;

    let outer_csv = fs::read_to_string(dir.join("outer.csv"))?;
    print!("{outer_csv}");
    println!("traces written to {}", dir.display());
    fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> itrust::Result<()> {
    run_example()
}
