// Fixed-step and linear-rate bound campaigns on a handful of seeds.

use itrust::verify::{fixed_step_campaign, linear_rate_campaign, summarize, CampaignConfig};

pub fn run_example() -> itrust::Result<()> {
    let seeds: Vec<u64> = (0..5).collect();
    let config = CampaignConfig::default();
    let mut rows = fixed_step_campaign(&seeds, &[10, 100, 1000], &config)?;
    rows.extend(linear_rate_campaign(&seeds, 300, 1e-6, &config)?);
    for s in summarize(&rows) {
        println!("{:<24} {}/{}", s.check, s.passed, s.rows);
    }
    for r in rows.iter().filter(|r| r.check == "fixed-step" && r.seed == 0) {
        println!("seed 0, K = {:>5}: gap {:.3e} <= bound {:.3e}", r.k, r.observed, r.bound);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> itrust::Result<()> {
    run_example()
}
