//! The iTrust outer loop.
//!
//! Each outer iteration builds the quadratic model `J = H(θ)`, `h = ∇f(θ)`,
//! `Δ = δ_t`, solves it on the box with the configured backend, computes the
//! reduction ratio `ρ_t` and adapts the radius:
//!
//! * `ρ_t < μ`: shrink to `γ₁δ_t` and move on without touching `θ`;
//! * `ρ_t > 1 - μ` with the step on the box boundary: grow to `min(γ₂δ_t, δ_max)`;
//! * otherwise keep `δ_t`.
//!
//! The step is taken iff `ρ_t > η`.

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ecim::{self, random_box_point, EcimConfig, Schedule};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{build_subproblem, Objective, QuadraticModel};
use crate::oracles;

/// Model decreases smaller than this in magnitude are degenerate.
pub const DEGENERATE_MODEL_TOL: f64 = 1e-14;
/// Relative tolerance of the `‖s‖_∞ = δ_t` boundary test.
pub const BOUNDARY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubproblemSolver {
    Ecim(EcimConfig),
    ExactBall,
    GridOracle { resolution: f64 },
}

impl SubproblemSolver {
    pub fn name(&self) -> &'static str {
        match self {
            SubproblemSolver::Ecim(_) => "ecim",
            SubproblemSolver::ExactBall => "exact-ball",
            SubproblemSolver::GridOracle { .. } => "grid",
        }
    }
}

/// How the diagonal trust-region scaling `D` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingRule {
    None,
    Fixed(Vec<f64>),
    /// `d_i = sqrt(max(|H_ii|, floor))` at every outer iteration.
    HessianDiagonal { floor: f64 },
}

impl ScalingRule {
    fn scaling_at(&self, hessian_diag: impl Fn() -> Result<DVector<f64>>) -> Result<Option<DVector<f64>>> {
        Ok(match self {
            ScalingRule::None => None,
            ScalingRule::Fixed(d) => Some(DVector::from_column_slice(d)),
            ScalingRule::HessianDiagonal { floor } => Some(hessian_diag()?.map(|v| v.abs().max(*floor).sqrt())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionConfig {
    pub delta0: f64,
    pub delta_max: f64,
    pub mu: f64,
    pub eta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Outer iterations `T`.
    pub max_iter: usize,
    pub solver: SubproblemSolver,
    /// Stop once `‖∇f(θ_t)‖₂ < gtol`.
    pub gtol: Option<f64>,
    pub scaling: ScalingRule,
    /// Start the ECIM from the previous step instead of a random box point.
    pub warm_start: bool,
    /// Interpret the ECIM step sizes in units of `1/L_t`, where `L_t` is a
    /// Gershgorin bound on the current model's curvature.
    pub lipschitz_steps: bool,
    /// Stop the ECIM once `‖g(k)‖₂ ≤ ecim_rtol · ‖∇f(θ_t)‖₂`. Zero disables it.
    pub ecim_rtol: f64,
    /// Shrink by `γ₁` after a rejection in the band `μ ≤ ρ_t ≤ η`. Without it
    /// such a rejection reproduces the same model and ratio at the next
    /// iteration and the run stalls.
    pub stall_shrink: bool,
    pub seed: u64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            delta_max: 100.0,
            mu: 0.1,
            eta: 0.75,
            gamma1: 0.25,
            gamma2: 2.0,
            max_iter: 500,
            solver: SubproblemSolver::Ecim(EcimConfig::new(Schedule::Fixed(1.0), 200_000)),
            gtol: Some(1e-8),
            scaling: ScalingRule::None,
            warm_start: false,
            lipschitz_steps: true,
            ecim_rtol: 1e-10,
            stall_shrink: true,
            seed: 0,
        }
    }
}

impl TrustRegionConfig {
    pub fn with_solver(mut self, solver: SubproblemSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(0.0 < self.mu && self.mu < self.eta && self.eta < 1.0) {
            return bad("thresholds must satisfy 0 < mu < eta < 1");
        }
        if !(0.0 < self.gamma1 && self.gamma1 < 1.0 && self.gamma2 > 1.0) {
            return bad("radius factors must satisfy 0 < gamma1 < 1 < gamma2");
        }
        if !(0.0 < self.delta0 && self.delta0 <= self.delta_max && self.delta_max.is_finite()) {
            return bad("radii must satisfy 0 < delta0 <= delta_max");
        }
        match &self.solver {
            SubproblemSolver::Ecim(c) => c.validate()?,
            SubproblemSolver::GridOracle { resolution } if !(*resolution > 0.0) => return bad("grid resolution must be positive"),
            _ => {}
        }
        if self.ecim_rtol < 0.0 {
            return bad("ecim_rtol must be >= 0");
        }
        Ok(())
    }
}

/// A solved subproblem: the step in original coordinates and its model value.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemStep {
    pub step: DVector<f64>,
    pub value: f64,
    /// ECIM updates performed (zero for the oracles).
    pub iterations: usize,
    /// `‖u‖_∞` of the step in the solver's (scaled) coordinates.
    pub scaled_inf_norm: f64,
}

/// Solve `model` with `solver`. The ECIM starts from a box point drawn with `seed`.
pub fn solve_subproblem(model: &QuadraticModel, solver: &SubproblemSolver, seed: u64) -> Result<SubproblemStep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s0 = random_box_point(model.dim(), model.delta(), &mut rng);
    solve_subproblem_from(model, solver, &s0, seed)
}

/// As [`solve_subproblem`] with an explicit ECIM starting point (scaled coordinates).
pub fn solve_subproblem_from(
    model: &QuadraticModel,
    solver: &SubproblemSolver,
    s0: &DVector<f64>,
    seed: u64,
) -> Result<SubproblemStep> {
    let scaled = model.scaled();
    let (u, iterations) = match solver {
        SubproblemSolver::Ecim(config) => {
            let mut config = config.clone();
            config.seed ^= seed.rotate_left(17);
            let summary = ecim::minimize(&scaled, &config, s0)?;
            (summary.best_iterate, summary.iterations_run)
        }
        SubproblemSolver::ExactBall => (oracles::exact_ball_for_model(&scaled)?.s_star, 0),
        SubproblemSolver::GridOracle { resolution } => (oracles::grid_minimize_box(&scaled, *resolution)?.s_star, 0),
    };
    let step = model.unscale(&u);
    let value = model.energy(&step)?;
    Ok(SubproblemStep { scaled_inf_norm: linalg::inf_norm(&u), step, value, iterations })
}

/// `ρ = (f(θ + step) - f(θ)) / model_value`.
pub fn reduction_ratio(objective: &Objective, theta: &DVector<f64>, step: &DVector<f64>, model_value: f64) -> Result<f64> {
    if !(model_value.abs() >= DEGENERATE_MODEL_TOL) {
        return Err(Error::DegenerateModel(model_value));
    }
    let f0 = finite_value(objective, theta)?;
    let f1 = finite_value(objective, &(theta + step))?;
    Ok((f1 - f0) / model_value)
}

fn finite_value(objective: &Objective, theta: &DVector<f64>) -> Result<f64> {
    let v = objective.value(theta)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{:?}", theta.as_slice())))
    }
}

/// Next radius after a step with ratio `rho` and (scaled) sup-norm `step_inf_norm`.
pub fn update_radius(rho: f64, delta: f64, step_inf_norm: f64, config: &TrustRegionConfig) -> f64 {
    if !(rho >= config.mu) {
        return config.gamma1 * delta;
    }
    let on_boundary = (step_inf_norm - delta).abs() <= BOUNDARY_RTOL * delta.max(1.0);
    if rho > 1.0 - config.mu && on_boundary {
        (config.gamma2 * delta).min(config.delta_max)
    } else {
        delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub theta: Vec<f64>,
    pub delta: f64,
    /// `None` when the model was degenerate or the solver failed.
    pub rho: Option<f64>,
    pub step: Vec<f64>,
    pub model_value: f64,
    pub f: f64,
    pub accepted: bool,
    pub grad_norm: f64,
    pub ecim_iterations: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// The radius became too small to move `θ` in floating point.
    RadiusCollapsed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionTrace {
    pub records: Vec<IterationRecord>,
    pub theta: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub termination: Termination,
}

impl TrustRegionTrace {
    pub fn final_theta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta)
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn accepted_steps(&self) -> usize {
        self.records.iter().filter(|r| r.accepted).count()
    }

    /// CSV, one row per outer iteration:
    /// `t,delta,rho,model_value,f,grad_norm,accepted,ecim_iterations,note`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            t: usize,
            delta: f64,
            rho: Option<f64>,
            model_value: f64,
            f: f64,
            grad_norm: f64,
            accepted: bool,
            ecim_iterations: usize,
            note: Option<&'a str>,
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(Row {
                t: r.t,
                delta: r.delta,
                rho: r.rho,
                model_value: r.model_value,
                f: r.f,
                grad_norm: r.grad_norm,
                accepted: r.accepted,
                ecim_iterations: r.ecim_iterations,
                note: r.note.as_deref(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn iteration_seed(base: u64, t: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = base.wrapping_add((t as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run the iTrust outer loop from `theta0`.
pub fn itrust(objective: &Objective, config: &TrustRegionConfig, theta0: &DVector<f64>) -> Result<TrustRegionTrace> {
    config.validate()?;
    let n = objective.dim();
    let mut theta = theta0.clone();
    let mut f = finite_value(objective, &theta)?;
    let mut grad = objective.gradient(&theta)?;
    let mut delta = config.delta0;
    let mut records = Vec::new();
    let mut warm: Option<DVector<f64>> = None;
    let mut termination = Termination::MaxIterations;

    for t in 0..config.max_iter {
        let grad_norm = grad.norm();
        if config.gtol.is_some_and(|tol| grad_norm < tol) {
            termination = Termination::GradientTolerance;
            break;
        }
        if delta <= f64::EPSILON * theta.amax().max(1.0) * 1e-2 {
            termination = Termination::RadiusCollapsed;
            break;
        }

        let scaling = config.scaling.scaling_at(|| Ok(objective.hessian(&theta)?.diagonal()))?;
        let model = build_subproblem(objective, &theta, delta, scaling.as_ref())?;
        let seed = iteration_seed(config.seed, t);

        let solver = match &config.solver {
            SubproblemSolver::Ecim(ecim_config) => {
                let mut c = ecim_config.clone();
                if config.lipschitz_steps {
                    let l = linalg::gershgorin_bound(&model.scaled().symmetric_coupling());
                    if l > 0.0 {
                        c.schedule = c.schedule.scaled_by(1.0 / l);
                    }
                }
                if config.ecim_rtol > 0.0 {
                    c.gm_tol = config.ecim_rtol * grad_norm;
                }
                SubproblemSolver::Ecim(c)
            }
            other => other.clone(),
        };
        let solved = match (&warm, config.warm_start) {
            (Some(s0), true) => solve_subproblem_from(&model, &solver, &ecim::project_box(s0, delta), seed),
            _ => solve_subproblem(&model, &solver, seed),
        };

        let mut record = IterationRecord {
            t,
            theta: theta.as_slice().to_vec(),
            delta,
            rho: None,
            step: vec![0.0; n],
            model_value: 0.0,
            f,
            accepted: false,
            grad_norm,
            ecim_iterations: 0,
            note: None,
        };

        let sub = match solved {
            Ok(sub) => sub,
            Err(Error::Diverged { iteration, .. }) => {
                record.note = Some(format!("solver diverged at k = {iteration}"));
                records.push(record);
                delta *= config.gamma1;
                continue;
            }
            Err(e) => return Err(e),
        };
        record.step = sub.step.as_slice().to_vec();
        record.model_value = sub.value;
        record.ecim_iterations = sub.iterations;

        // a useful step must predict a decrease
        if !(sub.value <= -DEGENERATE_MODEL_TOL) {
            record.note = Some("degenerate model".into());
            records.push(record);
            delta *= config.gamma1;
            warm = Some(DVector::zeros(n));
            continue;
        }
        let rho = reduction_ratio(objective, &theta, &sub.step, sub.value)?;
        record.rho = Some(rho);

        let next_delta = update_radius(rho, delta, sub.scaled_inf_norm, config);
        if rho < config.mu {
            records.push(record);
            delta = next_delta;
            warm = Some(sub.step.clone());
            continue;
        }
        if rho > config.eta {
            record.accepted = true;
            theta += &sub.step;
            f = finite_value(objective, &theta)?;
            grad = objective.gradient(&theta)?;
            warm = Some(DVector::zeros(n));
            delta = next_delta;
        } else {
            warm = Some(sub.step.clone());
            if config.stall_shrink {
                record.note = Some("stalled".into());
                delta *= config.gamma1;
            } else {
                delta = next_delta;
            }
        }
        records.push(record);
    }

    Ok(TrustRegionTrace {
        records,
        grad_norm: grad.norm(),
        theta: theta.as_slice().to_vec(),
        f,
        termination,
    })
}
