//! Convergence-bound campaigns for the ECIM on small random quadratics.
//!
//! Every campaign draws seeded instances, obtains `E*` and `s*` from the grid
//! oracle, runs the machine and compares an observed quantity with the bound
//! it should satisfy. Results are flat [`CheckRow`]s sorted by
//! `(check, seed, k)` so reports do not depend on scheduling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecim::{self, random_box_point, EcimConfig, Schedule};
use crate::error::{Error, Result};
use crate::model::QuadraticModel;
use crate::objectives::{estimate_constants, estimate_mu_p, ConstantEstimates};
use crate::oracles::{exact_ball_for_model, grid_minimize_box_with};

/// Gaps at or below this are excluded from rate fits.
pub const GAP_FLOOR: f64 = 1e-14;
/// Points needed for a rate fit.
pub const MIN_FIT_POINTS: usize = 4;
/// Absolute slack on the linear-rate bound; matches the gap floor of the μ_p estimator.
pub const LINEAR_RATE_SLACK: f64 = 1e-12;
/// Largest dimension the reference optimum is computed for.
pub const REFERENCE_MAX_DIM: usize = 3;
/// Projected-gradient polish steps after the lattice search.
pub const REFERENCE_POLISH_STEPS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceFamily {
    /// `J = MᵀM` with a Gaussian square `M`.
    Convex,
    /// Rank-one `J = vvᵀ`: convex but not strongly convex.
    Singular,
    /// `J = Q diag(λ) Qᵀ` with `λ_i ~ U[0.5, 2]`.
    StronglyConvex,
}

impl InstanceFamily {
    pub fn name(self) -> &'static str {
        match self {
            InstanceFamily::Convex => "convex",
            InstanceFamily::Singular => "singular",
            InstanceFamily::StronglyConvex => "strongly-convex",
        }
    }

    fn tag(self) -> u64 {
        match self {
            InstanceFamily::Convex => 0x00c0_4e3e,
            InstanceFamily::Singular => 0x0051_4a01,
            InstanceFamily::StronglyConvex => 0x0057_c0de,
        }
    }
}

/// Seeded generator shared by the instance and its starting point.
pub fn instance_rng(family: InstanceFamily, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ family.tag().rotate_left(32))
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut *rng))
}

fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut *rng))
}

/// Draw a model from `family` using `rng`. The field is `N(0, I)`.
pub fn sample_instance(family: InstanceFamily, n: usize, delta: f64, rng: &mut ChaCha8Rng) -> Result<QuadraticModel> {
    let j = match family {
        InstanceFamily::Convex => {
            let m = gaussian_matrix(n, n, rng);
            m.transpose() * m / n as f64
        }
        InstanceFamily::Singular => {
            let v = gaussian_vector(n, rng).normalize();
            &v * v.transpose()
        }
        InstanceFamily::StronglyConvex => {
            let q = gaussian_matrix(n, n, rng).qr().q();
            let lambda = DVector::from_fn(n, |_, _| rng.random_range(0.5..2.0));
            &q * DMatrix::from_diagonal(&lambda) * q.transpose()
        }
    };
    let h = gaussian_vector(n, rng);
    QuadraticModel::new(j, h, delta)
}

/// A seeded instance together with its seeded starting point.
pub fn random_instance(family: InstanceFamily, n: usize, delta: f64, seed: u64) -> Result<(QuadraticModel, DVector<f64>)> {
    let mut rng = instance_rng(family, seed);
    let model = sample_instance(family, n, delta, &mut rng)?;
    let s0 = random_box_point(n, delta, &mut rng);
    Ok((model, s0))
}

/// The box optimum and the problem constants of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub s_star: DVector<f64>,
    pub e_star: f64,
    pub constants: ConstantEstimates,
}

/// Grid resolution for the reference optimum: 1001 points per axis up to
/// `n = 2`, 101 beyond.
pub fn reference_resolution(n: usize, delta: f64) -> f64 {
    let cells = if n <= 2 { 1000.0 } else { 100.0 };
    2.0 * delta / cells
}

pub fn reference(model: &QuadraticModel) -> Result<Reference> {
    let n = model.dim();
    if n > REFERENCE_MAX_DIM {
        return Err(Error::Capability(format!(
            "reference optimum needs the grid oracle, which is limited to n <= {REFERENCE_MAX_DIM} here (n = {n})"
        )));
    }
    let sol = grid_minimize_box_with(model, reference_resolution(n, model.delta()), REFERENCE_POLISH_STEPS)?;
    Ok(Reference { s_star: sol.s_star, e_star: sol.value, constants: estimate_constants(model) })
}

/// `½(D²/(βK) + βG²)`, infinite for `K = 0`.
pub fn fixed_step_bound(d0: f64, beta: f64, k: usize, g: f64) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    0.5 * (d0 * d0 / (beta * k as f64) + beta * g * g)
}

/// `D·G/√K`, infinite for `K = 0`.
pub fn fixed_horizon_bound(d0: f64, g: f64, k: usize) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    d0 * g / (k as f64).sqrt()
}

/// `(1 − βμ_p)^K · gap₀`.
pub fn linear_rate_bound(beta: f64, mu_p: f64, k: usize, gap0: f64) -> f64 {
    (1.0 - beta * mu_p).max(0.0).powi(k as i32) * gap0
}

/// `(L/μ_p)·ln(gap₀/ε)`, zero once `gap₀ ≤ ε`.
pub fn linear_rate_iterations(lipschitz: f64, mu_p: f64, gap0: f64, eps: f64) -> f64 {
    if gap0 <= eps {
        0.0
    } else {
        lipschitz / mu_p * (gap0 / eps).ln()
    }
}

/// Least-squares line through `(x, y)` with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

fn fit_line(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData { usable: points.len(), required: MIN_FIT_POINTS });
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("rate fit needs at least two distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { slope, intercept: my - slope * mx, r2, points: points.len() })
}

fn usable(k: f64, gap: f64) -> bool {
    gap.is_finite() && gap > GAP_FLOOR && k.is_finite()
}

/// Fit `log(gap) = slope·log(K) + intercept`.
pub fn fit_loglog(series: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<_> = series.iter().filter(|(k, g)| *k > 0.0 && usable(*k, *g)).map(|(k, g)| (k.ln(), g.ln())).collect();
    fit_line(&pts)
}

/// Fit `log(gap) = slope·K + intercept`.
pub fn fit_semilog(series: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<_> = series.iter().filter(|(k, g)| usable(*k, *g)).map(|(k, g)| (*k, g.ln())).collect();
    fit_line(&pts)
}

/// One observed-versus-bound comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub family: InstanceFamily,
    pub seed: u64,
    pub k: usize,
    pub observed: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub note: Option<String>,
}

impl CheckRow {
    fn new(check: &str, family: InstanceFamily, seed: u64, k: usize, observed: f64, bound: f64, satisfied: bool) -> Self {
        Self { check: check.into(), family, seed, k, observed, bound, satisfied, note: None }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Pass rates per check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: String,
    pub rows: usize,
    pub passed: usize,
}

impl CheckSummary {
    pub fn pass_rate(&self) -> f64 {
        if self.rows == 0 {
            0.0
        } else {
            self.passed as f64 / self.rows as f64
        }
    }
}

pub fn summarize(rows: &[CheckRow]) -> Vec<CheckSummary> {
    let mut out: Vec<CheckSummary> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|s| s.check == r.check) {
            Some(s) => {
                s.rows += 1;
                s.passed += r.satisfied as usize;
            }
            None => out.push(CheckSummary { check: r.check.clone(), rows: 1, passed: r.satisfied as usize }),
        }
    }
    out
}

pub fn all_satisfied(rows: &[CheckRow]) -> bool {
    !rows.is_empty() && rows.iter().all(|r| r.satisfied)
}

fn sorted(mut rows: Vec<CheckRow>) -> Vec<CheckRow> {
    rows.sort_by(|a, b| (&a.check, a.seed, a.k).cmp(&(&b.check, b.seed, b.k)));
    rows
}

fn per_seed<F>(seeds: &[u64], cell: F) -> Result<Vec<CheckRow>>
where
    F: Fn(u64) -> Result<Vec<CheckRow>> + Sync,
{
    let cells: Vec<Vec<CheckRow>> = seeds.par_iter().map(|&s| cell(s)).collect::<Result<_>>()?;
    Ok(sorted(cells.into_iter().flatten().collect()))
}

/// Step `1/L`, or 1 for a zero model.
fn inverse_lipschitz(c: &ConstantEstimates) -> f64 {
    if c.lipschitz > 0.0 {
        1.0 / c.lipschitz
    } else {
        1.0
    }
}

/// Settings shared by the campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub dim: usize,
    pub delta: f64,
    pub sigma2: f64,
    /// Overrides the campaign's own step rule when set.
    pub beta0: Option<f64>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self { dim: 2, delta: 0.5, sigma2: 0.0, beta0: None }
    }
}

/// Fixed step `β` (default `1/L`): the best gap after `K` steps against
/// `½(‖s(0) − s*‖²/(βK) + βG²)`.
pub fn fixed_step_campaign(seeds: &[u64], ks: &[usize], cfg: &CampaignConfig) -> Result<Vec<CheckRow>> {
    let family = InstanceFamily::Convex;
    per_seed(seeds, |seed| {
        let (model, s0) = random_instance(family, cfg.dim, cfg.delta, seed)?;
        let r = reference(&model)?;
        let beta = cfg.beta0.unwrap_or_else(|| inverse_lipschitz(&r.constants));
        let d0 = (&s0 - &r.s_star).norm();
        let e0 = model.energy(&s0)?;
        ks.iter()
            .map(|&k| {
                let gap = if k == 0 {
                    e0 - r.e_star
                } else {
                    let config = EcimConfig::new(Schedule::Fixed(beta), k).with_seed(seed).with_noise(cfg.sigma2, false);
                    ecim::minimize(&model, &config, &s0)?.best_energy - r.e_star
                };
                let bound = fixed_step_bound(d0, beta, k, r.constants.g_bound);
                Ok(CheckRow::new("fixed-step", family, seed, k, gap, bound, gap <= bound))
            })
            .collect()
    })
}

/// Best gaps of one rank-one instance under the fixed-horizon step
/// `β₀/√K`, `β₀ = ‖s(0) − s*‖/G`, as `(K, gap, ‖s(0) − s*‖·G/√K)`.
pub fn fixed_horizon_gaps(seed: u64, ks: &[usize], cfg: &CampaignConfig) -> Result<Vec<(usize, f64, f64)>> {
    let (model, s0) = random_instance(InstanceFamily::Singular, cfg.dim, cfg.delta, seed)?;
    let r = reference(&model)?;
    let d0 = (&s0 - &r.s_star).norm();
    let g = r.constants.g_bound;
    let beta0 = cfg.beta0.unwrap_or(if g > 0.0 { d0 / g } else { 1.0 });
    ks.iter()
        .map(|&k| {
            let gap = if k == 0 {
                model.energy(&s0)? - r.e_star
            } else {
                let config = EcimConfig::new(Schedule::FixedHorizon(beta0), k).with_seed(seed).with_noise(cfg.sigma2, false);
                ecim::minimize(&model, &config, &s0)?.best_energy - r.e_star
            };
            Ok((k, gap, fixed_horizon_bound(d0, g, k)))
        })
        .collect()
}

/// Target range of the fixed-horizon log-log slope.
pub const FIXED_HORIZON_SLOPE: (f64, f64) = (-0.7, -0.4);

/// Fixed-horizon gaps against their bound at every `K`, plus the log-log
/// slope of gap against `K` per instance.
pub fn fixed_horizon_campaign(seeds: &[u64], ks: &[usize], cfg: &CampaignConfig) -> Result<Vec<CheckRow>> {
    let family = InstanceFamily::Singular;
    let (lo, hi) = FIXED_HORIZON_SLOPE;
    per_seed(seeds, |seed| {
        let gaps = fixed_horizon_gaps(seed, ks, cfg)?;
        let mut rows: Vec<CheckRow> = gaps
            .iter()
            .map(|&(k, gap, bound)| CheckRow::new("fixed-horizon-bound", family, seed, k, gap, bound, gap <= bound))
            .collect();
        let series: Vec<_> = gaps.iter().map(|&(k, gap, _)| (k as f64, gap)).collect();
        let k_max = ks.iter().copied().max().unwrap_or(0);
        rows.push(match fit_loglog(&series) {
            Ok(fit) => CheckRow::new("fixed-horizon-slope", family, seed, k_max, fit.slope, hi, (lo..=hi).contains(&fit.slope))
                .with_note(format!("target [{lo}, {hi}]; r2 = {:.4}; points = {}", fit.r2, fit.points)),
            Err(e) => CheckRow::new("fixed-horizon-slope", family, seed, k_max, f64::NAN, hi, false).with_note(e.to_string()),
        });
        Ok(rows)
    })
}

/// Decreasing steps `β₀/(k+1)` (default `β₀ = 1/L`): the gap of the weighted
/// average iterate must drop at least tenfold from `k_short` to `k_long` and
/// end below `1e-3`.
pub fn decreasing_campaign(seeds: &[u64], k_short: usize, k_long: usize, cfg: &CampaignConfig) -> Result<Vec<CheckRow>> {
    let family = InstanceFamily::Convex;
    per_seed(seeds, |seed| {
        let (model, s0) = random_instance(family, cfg.dim, cfg.delta, seed)?;
        let r = reference(&model)?;
        let beta0 = cfg.beta0.unwrap_or_else(|| inverse_lipschitz(&r.constants));
        let avg_gap = |k: usize| -> Result<f64> {
            let config = EcimConfig::new(Schedule::Decreasing(beta0), k).with_seed(seed).with_noise(cfg.sigma2, true);
            Ok(model.energy(&ecim::minimize(&model, &config, &s0)?.averaged_iterate)? - r.e_star)
        };
        let (short, long) = (avg_gap(k_short)?, avg_gap(k_long)?);
        Ok(vec![
            CheckRow::new("decreasing-average-drop", family, seed, k_long, long, short / 10.0, long <= short / 10.0)
                .with_note(format!("gap at K = {k_short}: {short:.6e}")),
            CheckRow::new("decreasing-average-absolute", family, seed, k_long, long, 1e-3, long < 1e-3),
        ])
    })
}

/// Fixed step `1/L` on strongly convex instances with the empirical `μ_p`:
/// `gap_K ≤ (1 − βμ_p)^K·gap₀` at every `K ≤ k_max` (reported as the worst
/// excess), and the steps needed to reach `eps` against `(L/μ_p)·ln(gap₀/ε)`
/// with a 10% allowance.
pub fn linear_rate_campaign(seeds: &[u64], k_max: usize, eps: f64, cfg: &CampaignConfig) -> Result<Vec<CheckRow>> {
    let family = InstanceFamily::StronglyConvex;
    per_seed(seeds, |seed| {
        let (model, s0) = random_instance(family, cfg.dim, cfg.delta, seed)?;
        let r = reference(&model)?;
        let l = r.constants.lipschitz;
        let beta = cfg.beta0.unwrap_or(1.0 / l);
        let config = EcimConfig::new(Schedule::Fixed(beta), k_max).with_seed(seed);
        let trace = ecim::run_ecim(&model, &config, &s0)?;
        let gaps: Vec<f64> = trace.energies.iter().map(|e| e - r.e_star).collect();
        let gap0 = gaps[0];
        let Some(mu_p) = estimate_mu_p(&trace, r.e_star) else {
            let why = "no iterate above the gap floor";
            return Ok(vec![
                CheckRow::new("linear-rate-bound", family, seed, k_max, f64::NAN, LINEAR_RATE_SLACK, false).with_note(why),
                CheckRow::new("linear-rate-iterations", family, seed, k_max, f64::NAN, f64::NAN, false).with_note(why),
            ]);
        };
        let excess = gaps
            .iter()
            .enumerate()
            .map(|(k, g)| g - linear_rate_bound(beta, mu_p, k, gap0))
            .fold(f64::NEG_INFINITY, f64::max);
        let predicted = linear_rate_iterations(l, mu_p, gap0, eps);
        let reached = gaps.iter().position(|g| *g <= eps);
        let note = format!("mu_p = {mu_p:.6e}; L = {l:.6e}; gap0 = {gap0:.6e}");
        Ok(vec![
            CheckRow::new("linear-rate-bound", family, seed, k_max, excess, LINEAR_RATE_SLACK, excess <= LINEAR_RATE_SLACK)
                .with_note(note.clone()),
            match reached {
                Some(k) => CheckRow::new("linear-rate-iterations", family, seed, k, k as f64, 1.1 * predicted, k as f64 <= 1.1 * predicted),
                None => CheckRow::new("linear-rate-iterations", family, seed, k_max, f64::INFINITY, 1.1 * predicted, false),
            }
            .with_note(note),
        ])
    })
}

/// Empirical `μ_p` against the curvature floor `μ = λ_min(S)`:
/// `0 < μ_p ≤ μ + 1e-9`.
pub fn pl_constant_scan(seeds: &[u64], k_max: usize, cfg: &CampaignConfig) -> Result<Vec<CheckRow>> {
    let family = InstanceFamily::StronglyConvex;
    per_seed(seeds, |seed| {
        let (model, s0) = random_instance(family, cfg.dim, cfg.delta, seed)?;
        let r = reference(&model)?;
        let mu = r.constants.mu.unwrap_or(0.0);
        let beta = cfg.beta0.unwrap_or(1.0 / r.constants.lipschitz);
        let trace = ecim::run_ecim(&model, &EcimConfig::new(Schedule::Fixed(beta), k_max).with_seed(seed), &s0)?;
        let row = match estimate_mu_p(&trace, r.e_star) {
            Some(mu_p) => CheckRow::new("pl-constant", family, seed, k_max, mu_p, mu + 1e-9, mu_p > 0.0 && mu_p <= mu + 1e-9),
            None => CheckRow::new("pl-constant", family, seed, k_max, f64::NAN, mu + 1e-9, false)
                .with_note("no iterate above the gap floor"),
        };
        let interior = crate::linalg::inf_norm(&r.s_star) < model.delta() * (1.0 - 1e-9);
        Ok(vec![row.with_note(if interior { "interior optimum" } else { "optimum on the boundary" })])
    })
}

/// ECIM, exact ball and grid box optimum on one subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub seed: u64,
    pub n: usize,
    pub delta: f64,
    pub ecim: f64,
    pub exact_ball: f64,
    pub grid: f64,
    /// `−E(ECIM) / |E*|`.
    pub c: f64,
    pub ecim_below_ball: bool,
    pub ecim_near_grid: bool,
}

impl OracleComparison {
    pub fn passed(&self, c_min: f64) -> bool {
        self.ecim_below_ball && self.ecim_near_grid && self.c >= c_min
    }
}

/// ECIM budget for subproblem comparisons.
pub const COMPARISON_ITERATIONS: usize = 50_000;

/// Random PSD subproblems alternating between `n = 2` and `n = 3`.
pub fn compare_oracles(seeds: &[u64], delta: f64) -> Result<Vec<OracleComparison>> {
    let mut rows: Vec<OracleComparison> = seeds
        .par_iter()
        .map(|&seed| {
            let n = if seed % 2 == 0 { 2 } else { 3 };
            let (model, s0) = random_instance(InstanceFamily::Convex, n, delta, seed)?;
            let r = reference(&model)?;
            let mut config = EcimConfig::new(Schedule::Fixed(inverse_lipschitz(&r.constants)), COMPARISON_ITERATIONS).with_seed(seed);
            config.gm_tol = 1e-13;
            let ecim_value = ecim::minimize(&model, &config, &s0)?.best_energy;
            let ball = exact_ball_for_model(&model)?.value;
            Ok(OracleComparison {
                seed,
                n,
                delta,
                ecim: ecim_value,
                exact_ball: ball,
                grid: r.e_star,
                c: -ecim_value / r.e_star.abs(),
                ecim_below_ball: ecim_value <= ball + 1e-6,
                ecim_near_grid: (ecim_value - r.e_star).abs() <= 1e-4,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.seed);
    Ok(rows)
}
