//! The `itrust` experiment runner.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage error,
//! 3 numerical error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ecim::{EcimConfig, Schedule};
use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::{find_problem, problem_suite, TestProblem};
use crate::trust_region::{itrust, ScalingRule, SubproblemSolver, TrustRegionConfig, TrustRegionTrace};
use crate::verify::{self, CampaignConfig, CheckRow, InstanceFamily};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Default ECIM budget per subproblem for `solve`.
pub const SOLVE_ECIM_ITERATIONS: usize = 200_000;
/// Horizons for the fixed-horizon campaigns.
pub const FIXED_HORIZON_KS: [usize; 7] = [100, 300, 1000, 3000, 10_000, 30_000, 100_000];
/// Grid spacing when `grid` is the subproblem solver.
pub const SOLVE_GRID_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Ecim,
    ExactBall,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Fixed,
    FixedHorizon,
    Decreasing,
}

impl ScheduleKind {
    fn with_base(self, beta0: f64) -> Schedule {
        match self {
            ScheduleKind::Fixed => Schedule::Fixed(beta0),
            ScheduleKind::FixedHorizon => Schedule::FixedHorizon(beta0),
            ScheduleKind::Decreasing => Schedule::Decreasing(beta0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    All,
    FixedStep,
    FixedHorizon,
    Decreasing,
    LinearRate,
    PlConstant,
}

#[derive(Debug, Parser)]
#[command(name = "itrust", version, about = "Trust-region optimisation with a simulated coherent Ising machine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the trust-region method on a suite problem.
    Solve(CommonArgs),
    /// Check observed ECIM gaps against their theoretical bounds.
    VerifyBounds {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "all")]
        check: CheckKind,
    },
    /// Fit convergence rates of the ECIM gap.
    RateFit(CommonArgs),
    /// Compare ECIM, exact-ball and grid solutions of random subproblems.
    CompareOracles(CommonArgs),
    /// List the built-in test problems.
    ListProblems {
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

/// Flags shared by the experiment commands. Every flag can also be given in
/// the `--config` file as `key = value`, using the flag name as the key.
#[derive(Debug, Clone, Default, Args)]
struct CommonArgs {
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Subproblem solver(s), comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    solver: Vec<SolverKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seed list: `a..b` (end exclusive) or comma separated values.
    #[arg(long)]
    seeds: Option<String>,
    /// ECIM iterations; a comma separated list for campaigns.
    #[arg(long = "K", value_delimiter = ',')]
    k: Vec<usize>,
    /// Outer trust-region iterations.
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, value_enum)]
    schedule: Option<ScheduleKind>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long = "delta-max")]
    delta_max: Option<f64>,
    /// Instance dimension for the campaigns.
    #[arg(long)]
    dim: Option<usize>,
    /// Output directory. Without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

const CONFIG_KEYS: &[&str] = &[
    "problem", "solver", "seed", "seeds", "K", "T", "beta0", "sigma2", "schedule", "delta0", "delta-max", "dim", "out",
    "format",
];

/// Fully resolved command parameters. Serialised (without output location)
/// for the config hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub problem: Option<String>,
    pub solvers: Vec<SolverKind>,
    pub seeds: Vec<u64>,
    pub k: Vec<usize>,
    pub t: Option<usize>,
    pub beta0: Option<f64>,
    pub sigma2: f64,
    pub schedule: Option<ScheduleKind>,
    pub delta0: Option<f64>,
    pub delta_max: Option<f64>,
    pub dim: usize,
    pub check: Option<CheckKind>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
}

impl ExperimentConfig {
    /// First 16 hex digits of the SHA-256 of the JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&json).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse `a..b` or `a,b,c`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidArgument(format!("cannot parse seed list {text:?}"));
    let text = text.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (a.trim().parse::<u64>().map_err(|_| bad())?, b.trim().parse::<u64>().map_err(|_| bad())?);
        (a..b).collect()
    } else {
        text.split(',').map(|s| s.trim().parse::<u64>().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("seed list is empty".into()));
    }
    Ok(seeds)
}

/// Parse the flat `key = value` format. `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::InvalidArgument(format!("config line {}: unknown key {key:?}", i + 1)));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn from_file<T: FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|_| Error::InvalidArgument(format!("config key {key}: cannot parse {v:?}"))))
        .transpose()
}

fn enum_from_file<T: ValueEnum>(file: &BTreeMap<String, String>, key: &str) -> Result<Vec<T>> {
    let Some(v) = file.get(key) else { return Ok(Vec::new()) };
    v.split(',')
        .map(|s| T::from_str(s.trim(), true).map_err(|_| Error::InvalidArgument(format!("config key {key}: unknown value {s:?}"))))
        .collect()
}

fn resolve(command: &str, args: &CommonArgs, check: Option<CheckKind>) -> Result<ExperimentConfig> {
    let file = match &args.config {
        Some(path) => parse_config_file(&fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    let seeds = match (&args.seeds, args.seed) {
        (Some(s), _) => Some(parse_seeds(s)?),
        (None, Some(s)) => Some(vec![s]),
        (None, None) => match (file.get("seeds"), from_file::<u64>(&file, "seed")?) {
            (Some(s), _) => Some(parse_seeds(s)?),
            (None, Some(s)) => Some(vec![s]),
            (None, None) => None,
        },
    };
    let default_seeds: Vec<u64> = match command {
        "solve" => vec![0],
        "verify-bounds" => (0..20).collect(),
        "rate-fit" => (0..10).collect(),
        _ => (0..100).collect(),
    };
    let k = if !args.k.is_empty() {
        args.k.clone()
    } else {
        file.get("K")
            .map(|v| v.split(',').map(|s| s.trim().parse::<usize>()).collect::<std::result::Result<Vec<_>, _>>())
            .transpose()
            .map_err(|_| Error::InvalidArgument("config key K: expected integers".into()))?
            .unwrap_or_default()
    };
    let solvers = if args.solver.is_empty() { enum_from_file(&file, "solver")? } else { args.solver.clone() };
    let schedule = match args.schedule {
        Some(s) => Some(s),
        None => enum_from_file::<ScheduleKind>(&file, "schedule")?.into_iter().next(),
    };
    let format = match args.format {
        Some(f) => f,
        None => enum_from_file::<Format>(&file, "format")?.into_iter().next().unwrap_or_default(),
    };
    let config = ExperimentConfig {
        command: command.to_string(),
        problem: args.problem.clone().or_else(|| file.get("problem").cloned()),
        solvers: if solvers.is_empty() { vec![SolverKind::Ecim] } else { solvers },
        seeds: seeds.unwrap_or(default_seeds),
        k,
        t: args.t.or(from_file(&file, "T")?),
        beta0: args.beta0.or(from_file(&file, "beta0")?),
        sigma2: args.sigma2.or(from_file(&file, "sigma2")?).unwrap_or(0.0),
        schedule,
        delta0: args.delta0.or(from_file(&file, "delta0")?),
        delta_max: args.delta_max.or(from_file(&file, "delta-max")?),
        dim: args.dim.or(from_file(&file, "dim")?).unwrap_or(2),
        check,
        out: args.out.clone().or_else(|| file.get("out").map(PathBuf::from)),
        format,
    };
    if let Some(p) = &config.problem {
        if find_problem(p).is_none() {
            return Err(Error::InvalidArgument(format!("unknown problem {p:?}; see `itrust list-problems`")));
        }
    }
    if !(config.sigma2 >= 0.0) {
        return Err(Error::InvalidArgument("sigma2 must be >= 0".into()));
    }
    if config.beta0.is_some_and(|b| !(b > 0.0)) {
        return Err(Error::InvalidArgument("beta0 must be positive".into()));
    }
    Ok(config)
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::Capability(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

/// Parse `std::env::args` and run; returns the process exit code.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// As [`main`] with explicit arguments (the first is the program name).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => resolve("solve", &a, None).and_then(|c| cmd_solve(&c)),
        Command::VerifyBounds { common, check } => {
            resolve("verify-bounds", &common, Some(check)).and_then(|c| cmd_verify_bounds(&c))
        }
        Command::RateFit(a) => resolve("rate-fit", &a, None).and_then(|c| cmd_rate_fit(&c)),
        Command::CompareOracles(a) => resolve("compare-oracles", &a, None).and_then(|c| cmd_compare_oracles(&c)),
        Command::ListProblems { format } => cmd_list_problems(format.unwrap_or_default()),
    };
    match outcome {
        Ok(passed) if passed => EXIT_OK,
        Ok(_) => EXIT_VERIFICATION,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn render<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(rows)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

/// Write `rows` to `<out>/<stem>.<ext>`, or to stdout without `--out`.
fn emit<T: Serialize>(config: &ExperimentConfig, stem: &str, rows: &[T]) -> Result<()> {
    let bytes = render(rows, config.format)?;
    match &config.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("{stem}.{}", config.format.extension())), bytes)?;
        }
        None => io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn write_trace(dir: &Path, stem: &str, format: Format, trace: &TrustRegionTrace) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => trace.write_csv(fs::File::create(path)?),
        Format::Json => Ok(fs::write(path, trace.to_json()? + "\n")?),
    }
}

fn note(config: &ExperimentConfig, text: &str) {
    if config.out.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
}

/// The trust-region settings `solve` uses for one solver and seed.
pub fn solve_config(config: &ExperimentConfig, solver: SolverKind, seed: u64, problem: &TestProblem) -> TrustRegionConfig {
    let defaults = TrustRegionConfig::default();
    let subproblem = match solver {
        SolverKind::Ecim => {
            let k = config.k.first().copied().unwrap_or(SOLVE_ECIM_ITERATIONS);
            let schedule = config.schedule.unwrap_or(ScheduleKind::Fixed).with_base(config.beta0.unwrap_or(1.0));
            SubproblemSolver::Ecim(EcimConfig::new(schedule, k).with_seed(seed).with_noise(config.sigma2, false))
        }
        SolverKind::ExactBall => SubproblemSolver::ExactBall,
        SolverKind::Grid => SubproblemSolver::GridOracle { resolution: SOLVE_GRID_RESOLUTION },
    };
    let delta_max = config.delta_max.unwrap_or(defaults.delta_max);
    TrustRegionConfig {
        delta0: config.delta0.unwrap_or(defaults.delta0.min(delta_max)),
        delta_max,
        max_iter: config.t.unwrap_or(defaults.max_iter),
        solver: subproblem,
        scaling: if problem.ill_scaled { ScalingRule::HessianDiagonal { floor: 1e-8 } } else { ScalingRule::None },
        seed,
        ..defaults
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub problem: String,
    pub solver: SolverKind,
    pub seed: u64,
    pub config_hash: String,
    pub iterations: usize,
    pub accepted: usize,
    pub ecim_iterations: usize,
    pub termination: String,
    pub f: f64,
    pub grad_norm: f64,
    pub min_hessian_eig: f64,
    /// Final point, `;` separated.
    pub theta: String,
}

/// Run one `solve` cell and summarise it.
pub fn solve_cell(config: &ExperimentConfig, problem: &TestProblem, solver: SolverKind, seed: u64) -> Result<(SolveSummary, TrustRegionTrace)> {
    let tr = solve_config(config, solver, seed, problem);
    let trace = itrust(&problem.objective, &tr, &problem.start)?;
    let theta = DVector::from_column_slice(&trace.theta);
    let min_eig = linalg::min_eigenvalue(&problem.objective.hessian(&theta)?);
    let summary = SolveSummary {
        problem: problem.name.clone(),
        solver,
        seed,
        config_hash: config.hash(),
        iterations: trace.iterations(),
        accepted: trace.accepted_steps(),
        ecim_iterations: trace.records.iter().map(|r| r.ecim_iterations).sum(),
        termination: serde_json::to_value(trace.termination)?.as_str().unwrap_or_default().to_string(),
        f: trace.f,
        grad_norm: trace.grad_norm,
        min_hessian_eig: min_eig,
        theta: trace.theta.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(";"),
    };
    Ok((summary, trace))
}

/// `solve`: run iTrust for every (solver, seed) cell, write the outer traces
/// and a summary.
pub fn cmd_solve(config: &ExperimentConfig) -> Result<bool> {
    let name = config.problem.as_deref().ok_or_else(|| Error::InvalidArgument("solve needs --problem".into()))?;
    let problem = find_problem(name).ok_or_else(|| Error::InvalidArgument(format!("unknown problem {name:?}")))?;
    let cells: Vec<(SolverKind, u64)> =
        config.solvers.iter().flat_map(|&s| config.seeds.iter().map(move |&seed| (s, seed))).collect();
    let mut results: Vec<(SolveSummary, TrustRegionTrace)> =
        cells.par_iter().map(|&(solver, seed)| solve_cell(config, &problem, solver, seed)).collect::<Result<_>>()?;
    results.sort_by_key(|r| (r.0.solver, r.0.seed));

    if let Some(dir) = &config.out {
        for (s, trace) in &results {
            let solver = serde_json::to_value(s.solver)?;
            let stem = format!("trace_{}_{}_seed{}", s.problem, solver.as_str().unwrap_or("solver"), s.seed);
            write_trace(dir, &stem, config.format, trace)?;
        }
    }
    let summaries: Vec<SolveSummary> = results.into_iter().map(|(s, _)| s).collect();
    for s in &summaries {
        note(
            config,
            &format!(
                "{} {:?} seed {}: {} iterations ({} accepted), f = {:.6e}, |grad| = {:.3e}, min eig = {:.3e}, {}",
                s.problem, s.solver, s.seed, s.iterations, s.accepted, s.f, s.grad_norm, s.min_hessian_eig, s.termination
            ),
        );
    }
    emit(config, "summary", &summaries)?;
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CheckOutRow<'a> {
    check: &'a str,
    family: &'static str,
    seed: u64,
    config_hash: &'a str,
    k: usize,
    observed: f64,
    bound: f64,
    satisfied: bool,
    note: Option<&'a str>,
}

fn emit_checks(config: &ExperimentConfig, stem: &str, rows: &[CheckRow]) -> Result<bool> {
    let hash = config.hash();
    let out: Vec<CheckOutRow<'_>> = rows
        .iter()
        .map(|r| CheckOutRow {
            check: &r.check,
            family: r.family.name(),
            seed: r.seed,
            config_hash: &hash,
            k: r.k,
            observed: r.observed,
            bound: r.bound,
            satisfied: r.satisfied,
            note: r.note.as_deref(),
        })
        .collect();
    emit(config, stem, &out)?;
    for s in verify::summarize(rows) {
        note(config, &format!("{}: {}/{} satisfied ({:.1}%)", s.check, s.passed, s.rows, 100.0 * s.pass_rate()));
    }
    Ok(verify::all_satisfied(rows))
}

fn campaign_config(config: &ExperimentConfig, default_delta: f64) -> Result<CampaignConfig> {
    if config.dim == 0 || config.dim > verify::REFERENCE_MAX_DIM {
        return Err(Error::Capability(format!(
            "bound campaigns need the grid oracle and support 1 <= dim <= {} (got {})",
            verify::REFERENCE_MAX_DIM,
            config.dim
        )));
    }
    Ok(CampaignConfig {
        dim: config.dim,
        delta: config.delta0.unwrap_or(default_delta),
        sigma2: config.sigma2,
        beta0: config.beta0,
    })
}

/// `verify-bounds`: one or all of the bound campaigns.
pub fn cmd_verify_bounds(config: &ExperimentConfig) -> Result<bool> {
    let check = config.check.unwrap_or(CheckKind::All);
    let want = |c: CheckKind| check == CheckKind::All || check == c;
    let ks = |default: &[usize]| if config.k.is_empty() { default.to_vec() } else { config.k.clone() };
    let k_max = |default: usize| config.k.iter().copied().max().unwrap_or(default);
    let seeds = &config.seeds;
    let mut rows = Vec::new();
    if want(CheckKind::FixedStep) {
        rows.extend(verify::fixed_step_campaign(seeds, &ks(&[10, 100, 1000, 10_000]), &campaign_config(config, 0.5)?)?);
    }
    if want(CheckKind::FixedHorizon) {
        let k = ks(&FIXED_HORIZON_KS);
        rows.extend(verify::fixed_horizon_campaign(seeds, &k, &campaign_config(config, 0.5)?)?);
    }
    if want(CheckKind::Decreasing) {
        let k_short = config.k.iter().copied().min().unwrap_or(100);
        rows.extend(verify::decreasing_campaign(seeds, k_short, k_max(100_000), &campaign_config(config, 1.0)?)?);
    }
    if want(CheckKind::LinearRate) {
        rows.extend(verify::linear_rate_campaign(seeds, k_max(500), 1e-6, &campaign_config(config, 0.5)?)?);
    }
    if want(CheckKind::PlConstant) {
        rows.extend(verify::pl_constant_scan(seeds, k_max(500), &campaign_config(config, 0.5)?)?);
    }
    emit_checks(config, "verify_bounds", &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFitRow {
    pub schedule: ScheduleKind,
    pub family: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
    pub passed: bool,
    pub note: Option<String>,
}

/// `rate-fit`: log-log slope of the best gap against `K` under the
/// fixed-horizon schedule (rank-one instances, target `[-0.7, -0.4]`), or the
/// semi-log slope of the gap against `k` under a fixed step on strongly
/// convex instances (negative with `r² ≥ 0.95`).
pub fn cmd_rate_fit(config: &ExperimentConfig) -> Result<bool> {
    let schedule = config.schedule.unwrap_or(ScheduleKind::FixedHorizon);
    let hash = config.hash();
    let camp = campaign_config(config, 0.5)?;
    let k_max = config.k.iter().copied().max().unwrap_or(500);
    let mut rows: Vec<RateFitRow> = match schedule {
        ScheduleKind::FixedHorizon => {
            let ks = if config.k.is_empty() { FIXED_HORIZON_KS.to_vec() } else { config.k.clone() };
            config.seeds.par_iter().map(|&seed| loglog_fit_row(seed, &ks, &camp, &hash)).collect::<Result<_>>()?
        }
        ScheduleKind::Fixed => {
            config.seeds.par_iter().map(|&seed| linear_fit_row(seed, k_max, &camp, &hash)).collect::<Result<_>>()?
        }
        ScheduleKind::Decreasing => {
            return Err(Error::InvalidArgument("rate-fit supports the fixed and fixed-horizon schedules".into()))
        }
    };
    rows.sort_by_key(|r| r.seed);
    emit(config, "rate_fit", &rows)?;
    let passed = rows.iter().filter(|r| r.passed).count();
    note(config, &format!("rate fits passing: {passed}/{}", rows.len()));
    Ok(!rows.is_empty() && passed == rows.len())
}

fn empty_fit_row(schedule: ScheduleKind, family: InstanceFamily, seed: u64, hash: &str) -> RateFitRow {
    RateFitRow {
        schedule,
        family: family.name(),
        seed,
        config_hash: hash.to_string(),
        slope: f64::NAN,
        intercept: f64::NAN,
        r2: f64::NAN,
        points: 0,
        passed: false,
        note: None,
    }
}

fn loglog_fit_row(seed: u64, ks: &[usize], camp: &CampaignConfig, hash: &str) -> Result<RateFitRow> {
    let gaps = verify::fixed_horizon_gaps(seed, ks, camp)?;
    let series: Vec<(f64, f64)> = gaps.iter().map(|&(k, gap, _)| (k as f64, gap)).collect();
    let mut row = empty_fit_row(ScheduleKind::FixedHorizon, InstanceFamily::Singular, seed, hash);
    let (lo, hi) = verify::FIXED_HORIZON_SLOPE;
    match verify::fit_loglog(&series) {
        Ok(fit) => {
            row.slope = fit.slope;
            row.intercept = fit.intercept;
            row.r2 = fit.r2;
            row.points = fit.points;
            row.passed = (lo..=hi).contains(&fit.slope);
        }
        Err(e) => row.note = Some(e.to_string()),
    }
    Ok(row)
}

fn linear_fit_row(seed: u64, k_max: usize, camp: &CampaignConfig, hash: &str) -> Result<RateFitRow> {
    let family = InstanceFamily::StronglyConvex;
    let (model, s0) = verify::random_instance(family, camp.dim, camp.delta, seed)?;
    let r = verify::reference(&model)?;
    let beta = camp.beta0.unwrap_or(1.0 / r.constants.lipschitz);
    let trace = crate::ecim::run_ecim(&model, &EcimConfig::new(Schedule::Fixed(beta), k_max).with_seed(seed), &s0)?;
    let series: Vec<(f64, f64)> = trace.energies.iter().enumerate().map(|(k, e)| (k as f64, e - r.e_star)).collect();
    let mut row = empty_fit_row(ScheduleKind::Fixed, family, seed, hash);
    match verify::fit_semilog(&series) {
        Ok(fit) => {
            row.slope = fit.slope;
            row.intercept = fit.intercept;
            row.r2 = fit.r2;
            row.points = fit.points;
            row.passed = fit.slope < 0.0 && fit.r2 >= 0.95;
        }
        Err(e) => row.note = Some(e.to_string()),
    }
    Ok(row)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ComparisonRow<'a> {
    seed: u64,
    config_hash: &'a str,
    n: usize,
    delta: f64,
    ecim: f64,
    exact_ball: f64,
    grid: f64,
    c: f64,
    ecim_below_ball: bool,
    ecim_near_grid: bool,
    passed: bool,
}

/// `compare-oracles`: ECIM against exact-ball and grid solutions.
pub fn cmd_compare_oracles(config: &ExperimentConfig) -> Result<bool> {
    let rows = verify::compare_oracles(&config.seeds, config.delta0.unwrap_or(0.5))?;
    let hash = config.hash();
    let out: Vec<ComparisonRow<'_>> = rows
        .iter()
        .map(|r| ComparisonRow {
            seed: r.seed,
            config_hash: &hash,
            n: r.n,
            delta: r.delta,
            ecim: r.ecim,
            exact_ball: r.exact_ball,
            grid: r.grid,
            c: r.c,
            ecim_below_ball: r.ecim_below_ball,
            ecim_near_grid: r.ecim_near_grid,
            passed: r.passed(0.9),
        })
        .collect();
    emit(config, "compare_oracles", &out)?;
    let passed = out.iter().filter(|r| r.passed).count();
    note(config, &format!("subproblems passing: {passed}/{}", out.len()));
    Ok(passed == out.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ProblemRow {
    name: String,
    dim: usize,
    convexity: String,
    ill_scaled: bool,
    optimum_value: Option<f64>,
}

/// `list-problems`: the suite, to stdout.
pub fn cmd_list_problems(format: Format) -> Result<bool> {
    let rows: Vec<ProblemRow> = problem_suite()
        .into_iter()
        .map(|p| ProblemRow {
            dim: p.objective.dim(),
            convexity: serde_json::to_value(p.convexity).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            ill_scaled: p.ill_scaled,
            optimum_value: p.known_optimum().map(|(_, v)| v),
            name: p.name,
        })
        .collect();
    io::stdout().write_all(&render(&rows, format)?)?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..4").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seeds("5, 1,2").unwrap(), vec![5, 1, 2]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn config_file_parsing() {
        let map = parse_config_file("# comment\nproblem = rosenbrock2\n\nK = 10,20 # trailing\n").unwrap();
        assert_eq!(map["problem"], "rosenbrock2");
        assert_eq!(map["K"], "10,20");
        assert!(parse_config_file("bogus = 1").is_err());
        assert!(parse_config_file("problem rosenbrock2").is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "problem = quadratic2\nseeds = 0..3\nT = 7\nsolver = exact-ball\n").unwrap();
        let args = CommonArgs { config: Some(path), t: Some(9), ..Default::default() };
        let c = resolve("solve", &args, None).unwrap();
        assert_eq!(c.problem.as_deref(), Some("quadratic2"));
        assert_eq!(c.seeds, vec![0, 1, 2]);
        assert_eq!(c.t, Some(9));
        assert_eq!(c.solvers, vec![SolverKind::ExactBall]);
    }

    #[test]
    fn unknown_problem_is_a_usage_error() {
        let args = CommonArgs { problem: Some("nope".into()), ..Default::default() };
        let err = resolve("solve", &args, None).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
    }

    #[test]
    fn hash_tracks_parameters_but_not_output_location() {
        let base = resolve("solve", &CommonArgs::default(), None).unwrap();
        let moved = ExperimentConfig { out: Some("elsewhere".into()), ..base.clone() };
        let changed = ExperimentConfig { sigma2: 0.1, ..base.clone() };
        assert_eq!(base.hash(), moved.hash());
        assert_ne!(base.hash(), changed.hash());
        assert_eq!(base.hash().len(), 16);
    }

    #[test]
    fn quadratic5_solve_reaches_gradient_tolerance() {
        let args = CommonArgs { problem: Some("quadratic5".into()), ..Default::default() };
        let config = resolve("solve", &args, None).unwrap();
        let problem = find_problem("quadratic5").unwrap();
        let (summary, _) = solve_cell(&config, &problem, SolverKind::Ecim, 0).unwrap();
        assert!(summary.grad_norm <= 1e-8);
    }
}
