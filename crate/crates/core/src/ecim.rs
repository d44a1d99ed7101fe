//! Simulated Economical Coherent Ising Machine.
//!
//! The modified machine is noisy projected gradient descent on the box
//! `[-Δ, Δ]ⁿ`:
//!
//! ```text
//! s(k+1) = Π_box( s(k) - β_k (∇E(s(k)) - ζ(k)) ),   ζ(k) ~ N(0, σ²I)
//! ```
//!
//! The original clipped-transfer dynamics are kept in [`legacy_pmim_step`]
//! for comparison only.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::QuadraticModel;

/// Clipping threshold of the legacy transfer function.
pub const LEGACY_CLIP: f64 = 0.4;

/// Energies beyond this magnitude are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Step-size schedule `β_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "beta", rename_all = "kebab-case")]
pub enum Schedule {
    /// Constant `β`.
    Fixed(f64),
    /// `β = β₀/√K`, constant over the run but tied to the horizon `K`.
    FixedHorizon(f64),
    /// `β_k = β₀/(k+1)`; harmonic, so `Σβ_k = ∞` and `Σβ_k² < ∞`.
    Decreasing(f64),
}

impl Schedule {
    pub fn base(&self) -> f64 {
        match *self {
            Schedule::Fixed(b) | Schedule::FixedHorizon(b) | Schedule::Decreasing(b) => b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.base();
        if b > 0.0 && b.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("step size must be positive, got {b}")))
        }
    }

    /// Same schedule kind with the base step multiplied by `factor`.
    pub fn scaled_by(&self, factor: f64) -> Self {
        match *self {
            Schedule::Fixed(b) => Schedule::Fixed(b * factor),
            Schedule::FixedHorizon(b) => Schedule::FixedHorizon(b * factor),
            Schedule::Decreasing(b) => Schedule::Decreasing(b * factor),
        }
    }

    pub fn step_size(&self, k: usize, horizon: usize) -> f64 {
        step_size(*self, k, horizon)
    }
}

/// `β_k` for iteration `k` of a run of length `horizon`.
pub fn step_size(schedule: Schedule, k: usize, horizon: usize) -> f64 {
    debug_assert!(horizon == 0 || k < horizon);
    match schedule {
        Schedule::Fixed(b) => b,
        Schedule::FixedHorizon(b0) => b0 / (horizon.max(1) as f64).sqrt(),
        Schedule::Decreasing(b0) => b0 / (k as f64 + 1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcimConfig {
    pub schedule: Schedule,
    /// Noise variance `σ²`.
    pub sigma2: f64,
    /// Number of updates `K`.
    pub iterations: usize,
    pub seed: u64,
    /// Scale the noise standard deviation by `β_k`.
    pub modulate_noise: bool,
    /// Stop early once `‖g(k)‖₂ ≤ gm_tol`. Zero disables the check.
    pub gm_tol: f64,
}

impl Default for EcimConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::Fixed(0.1),
            sigma2: 0.0,
            iterations: 1000,
            seed: 0,
            modulate_noise: false,
            gm_tol: 0.0,
        }
    }
}

impl EcimConfig {
    pub fn new(schedule: Schedule, iterations: usize) -> Self {
        Self { schedule, iterations, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, sigma2: f64, modulate: bool) -> Self {
        self.sigma2 = sigma2;
        self.modulate_noise = modulate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("ECIM needs at least one iteration".into()));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise variance must be >= 0, got {}", self.sigma2)));
        }
        if !(self.gm_tol >= 0.0) {
            return Err(Error::InvalidArgument("gm_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Seeded isotropic Gaussian noise `N(0, σ²I)`.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    sigma: f64,
}

impl NoiseSource {
    pub fn new(seed: u64, sigma2: f64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), sigma: sigma2.max(0.0).sqrt() }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Overwrite `out` with a sample whose standard deviation is `σ·scale`.
    /// With `σ = 0` the buffer is zeroed and no randomness is consumed.
    pub fn fill(&mut self, out: &mut DVector<f64>, scale: f64) {
        if self.sigma == 0.0 {
            out.fill(0.0);
            return;
        }
        let sd = self.sigma * scale;
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *v = sd * z;
        }
    }

    pub fn sample(&mut self, n: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        self.fill(&mut out, 1.0);
        out
    }
}

/// Euclidean projection onto `[-Δ, Δ]ⁿ`: a sign-preserving clamp.
pub fn project_box(z: &DVector<f64>, delta: f64) -> DVector<f64> {
    let mut out = z.clone();
    project_box_in_place(&mut out, delta);
    out
}

pub fn project_box_in_place(z: &mut DVector<f64>, delta: f64) {
    for v in z.iter_mut() {
        *v = v.clamp(-delta, delta);
    }
}

/// Uniform sample from `[-Δ, Δ]ⁿ`.
pub fn random_box_point<R: Rng + ?Sized>(n: usize, delta: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-delta..=delta))
}

/// One modified-ECIM update `Π(s - β(∇E(s) - noise))`.
pub fn ecim_step(model: &QuadraticModel, s: &DVector<f64>, beta: f64, noise: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(model.dim(), noise.len())?;
    let grad = model.energy_gradient(s)?;
    let z = s - (grad - noise) * beta;
    Ok(project_box(&z, model.delta()))
}

/// Legacy clipped-transfer update. Coordinates with `|s_i| ≤ clip` follow
/// `α·s_i - β·(Js)_i + noise_i`; all others are reset to zero.
pub fn legacy_pmim_step(
    coupling: &DMatrix<f64>,
    s: &DVector<f64>,
    alpha: f64,
    beta: f64,
    noise: &DVector<f64>,
    clip: f64,
) -> Result<DVector<f64>> {
    check_dim(coupling.ncols(), s.len())?;
    check_dim(coupling.nrows(), s.len())?;
    check_dim(s.len(), noise.len())?;
    let js = coupling * s;
    Ok(DVector::from_fn(s.len(), |i, _| {
        if s[i].abs() <= clip {
            alpha * s[i] - beta * js[i] + noise[i]
        } else {
            0.0
        }
    }))
}

/// Gradient mapping `(s - s_next)/β`.
pub fn gradient_mapping(s: &DVector<f64>, s_next: &DVector<f64>, beta: f64) -> DVector<f64> {
    (s - s_next) / beta
}

/// Full per-iteration history of an ECIM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcimTrace {
    /// `s(0), …, s(K)`.
    pub iterates: Vec<Vec<f64>>,
    /// `E(s(k))` for every stored iterate.
    pub energies: Vec<f64>,
    /// `β_k` used to go from `s(k)` to `s(k+1)`.
    pub betas: Vec<f64>,
    /// `‖g(k)‖₂` for `k = 0..K-1`.
    pub gm_norms: Vec<f64>,
    pub best_energy: f64,
    pub best_iterate: Vec<f64>,
    /// `Σβ_k s(k) / Σβ_k` over `k = 0..K-1`.
    pub averaged_iterate: Vec<f64>,
    /// Whether the supplied `s(0)` lay outside the box and was projected.
    pub s0_projected: bool,
    pub seed: u64,
}

impl EcimTrace {
    pub fn iterations(&self) -> usize {
        self.betas.len()
    }

    pub fn iterate(&self, k: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.iterates[k])
    }

    pub fn best_iterate_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.best_iterate)
    }

    pub fn averaged_iterate_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.averaged_iterate)
    }

    /// `min_{j ≤ k} E(s(j))` for every stored `k`.
    pub fn running_best(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.energies
            .iter()
            .map(|e| {
                best = best.min(*e);
                best
            })
            .collect()
    }

    /// CSV with columns `k,beta_k,energy,gm_norm,best_energy`. The final row
    /// (`k = K`) has empty `beta_k` and `gm_norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            k: usize,
            beta_k: Option<f64>,
            energy: f64,
            gm_norm: Option<f64>,
            best_energy: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for (k, (energy, best)) in self.energies.iter().zip(self.running_best()).enumerate() {
            w.serialize(Row {
                k,
                beta_k: self.betas.get(k).copied(),
                energy: *energy,
                gm_norm: self.gm_norms.get(k).copied(),
                best_energy: best,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Result of a run that keeps no per-step history.
#[derive(Debug, Clone, PartialEq)]
pub struct EcimSummary {
    pub best_iterate: DVector<f64>,
    pub best_energy: f64,
    pub last_iterate: DVector<f64>,
    pub last_energy: f64,
    pub averaged_iterate: DVector<f64>,
    pub initial_energy: f64,
    pub iterations_run: usize,
    pub s0_projected: bool,
}

struct StepRecord<'a> {
    beta: f64,
    next: &'a DVector<f64>,
    energy_next: f64,
    gm_norm: f64,
}

/// The shared update loop. `observe` sees every completed step.
fn drive<F>(model: &QuadraticModel, config: &EcimConfig, s0: &DVector<f64>, mut observe: F) -> Result<EcimSummary>
where
    F: FnMut(&StepRecord<'_>),
{
    config.validate()?;
    let n = model.dim();
    check_dim(n, s0.len())?;
    let delta = model.delta();
    let sym = model.symmetric_coupling();
    let field = model.field();

    let mut s = s0.clone();
    let s0_projected = s.iter().any(|v| v.abs() > delta);
    project_box_in_place(&mut s, delta);

    // E(s) = ½ sᵀ(Ss) + hᵀs; the product Ss doubles as the gradient.
    let mut ss = DVector::zeros(n);
    ss.gemv(1.0, &sym, &s, 0.0);
    let mut energy = 0.5 * s.dot(&ss) + field.dot(&s);
    check_energy(energy, 0)?;
    let initial_energy = energy;

    let mut noise = NoiseSource::new(config.seed, config.sigma2);
    let mut zeta = DVector::zeros(n);
    let mut next = DVector::zeros(n);

    let mut best_energy = energy;
    let mut best = s.clone();
    let mut weighted = DVector::zeros(n);
    let mut weight = 0.0;
    let horizon = config.iterations;
    let mut run = 0;

    for k in 0..horizon {
        let beta = config.schedule.step_size(k, horizon);
        let scale = if config.modulate_noise { beta } else { 1.0 };
        noise.fill(&mut zeta, scale);

        weighted.axpy(beta, &s, 1.0);
        weight += beta;

        // next = Π(s - β(Ss + h - ζ))
        next.copy_from(&s);
        next.axpy(-beta, &ss, 1.0);
        next.axpy(-beta, field, 1.0);
        next.axpy(beta, &zeta, 1.0);
        project_box_in_place(&mut next, delta);

        let gm_norm = s.metric_distance(&next) / beta;
        ss.gemv(1.0, &sym, &next, 0.0);
        let e_next = 0.5 * next.dot(&ss) + field.dot(&next);
        check_energy(e_next, k + 1)?;

        observe(&StepRecord { beta, next: &next, energy_next: e_next, gm_norm });
        std::mem::swap(&mut s, &mut next);
        energy = e_next;
        run = k + 1;
        // ties go to the later iterate: near convergence energies stop
        // resolving while the iterates still improve
        if energy <= best_energy {
            best_energy = energy;
            best.copy_from(&s);
        }
        if config.gm_tol > 0.0 && gm_norm <= config.gm_tol {
            break;
        }
    }

    Ok(EcimSummary {
        best_iterate: best,
        best_energy,
        averaged_iterate: weighted / weight,
        last_iterate: s,
        last_energy: energy,
        initial_energy,
        iterations_run: run,
        s0_projected,
    })
}

fn check_energy(energy: f64, iteration: usize) -> Result<()> {
    if !energy.is_finite() || energy.abs() > DIVERGENCE_LIMIT {
        Err(Error::Diverged { iteration, energy })
    } else {
        Ok(())
    }
}

/// Run the machine for `K` steps and record everything.
///
/// `s0` is projected into the box first if necessary. The model's scaling,
/// if any, is ignored here: pass `model.scaled()` to work in scaled
/// coordinates.
pub fn run_ecim(model: &QuadraticModel, config: &EcimConfig, s0: &DVector<f64>) -> Result<EcimTrace> {
    let start = project_box(s0, model.delta());
    let mut iterates = vec![start.as_slice().to_vec()];
    let mut energies = vec![f64::NAN];
    let mut betas = Vec::with_capacity(config.iterations);
    let mut gm_norms = Vec::with_capacity(config.iterations);
    let summary = drive(model, config, s0, |step| {
        iterates.push(step.next.as_slice().to_vec());
        energies.push(step.energy_next);
        betas.push(step.beta);
        gm_norms.push(step.gm_norm);
    })?;
    energies[0] = summary.initial_energy;
    Ok(EcimTrace {
        iterates,
        energies,
        betas,
        gm_norms,
        best_energy: summary.best_energy,
        best_iterate: summary.best_iterate.as_slice().to_vec(),
        averaged_iterate: summary.averaged_iterate.as_slice().to_vec(),
        s0_projected: summary.s0_projected,
        seed: config.seed,
    })
}

/// Run the machine without keeping the per-step history.
pub fn minimize(model: &QuadraticModel, config: &EcimConfig, s0: &DVector<f64>) -> Result<EcimSummary> {
    drive(model, config, s0, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::grid_minimize_box;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn psd_instance(seed: u64) -> QuadraticModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let j = a.transpose() * &a + DMatrix::identity(2, 2) * 0.1;
        let h = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        QuadraticModel::new(j, h, 0.5).unwrap()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_box(&v(&[0.1, -0.2]), 0.5), v(&[0.1, -0.2]));
        assert_eq!(project_box(&v(&[1.0, -2.0]), 0.5), v(&[0.5, -0.5]));
        let z = v(&[3.0, -0.1, -7.0]);
        let once = project_box(&z, 1.0);
        assert_eq!(project_box(&once, 1.0), once);
    }

    #[test]
    fn step_examples() {
        let m = QuadraticModel::new(DMatrix::identity(1, 1), v(&[0.0]), 0.5).unwrap();
        assert_eq!(ecim_step(&m, &v(&[0.4]), 1.0, &v(&[0.0])).unwrap(), v(&[0.0]));

        let m = QuadraticModel::new(DMatrix::identity(2, 2), v(&[-0.2, 0.1]), 1.0).unwrap();
        let s = v(&[0.2, -0.1]);
        assert_eq!(ecim_step(&m, &s, 0.3, &v(&[0.0, 0.0])).unwrap(), s);

        let m = QuadraticModel::new(DMatrix::identity(2, 2), v(&[-1.0, -1.0]), 0.5).unwrap();
        let next = ecim_step(&m, &v(&[0.0, 0.0]), 1.0, &v(&[0.0, 0.0])).unwrap();
        assert_eq!(next, v(&[0.5, 0.5]));
        // the box minimiser found by exhaustive search is the same corner
        let oracle = grid_minimize_box(&m, 1e-2).unwrap();
        assert!((oracle.s_star - &next).amax() < 1e-9);
    }

    #[test]
    fn step_rejects_bad_dimensions() {
        let m = QuadraticModel::new(DMatrix::identity(2, 2), v(&[0.0, 0.0]), 0.5).unwrap();
        assert!(ecim_step(&m, &v(&[0.0]), 1.0, &v(&[0.0, 0.0])).is_err());
        assert!(ecim_step(&m, &v(&[0.0, 0.0]), 1.0, &v(&[0.0])).is_err());
    }

    #[test]
    fn schedules() {
        assert_eq!(step_size(Schedule::Fixed(0.1), 17, 100), 0.1);
        for k in [0, 50, 99] {
            assert!((step_size(Schedule::FixedHorizon(1.0), k, 100) - 0.1).abs() < 1e-15);
        }
        let (mut sum, mut sq) = (0.0, 0.0);
        for k in 0..1_000_000 {
            let b = step_size(Schedule::Decreasing(1.0), k, 1_000_000);
            sum += b;
            sq += b * b;
        }
        assert!(sum > 14.0); // H_n ≈ ln n + 0.577
        assert!(sq < std::f64::consts::PI.powi(2) / 6.0);
        assert!(Schedule::Fixed(0.0).validate().is_err());
        assert!(Schedule::Decreasing(-1.0).validate().is_err());
    }

    #[test]
    fn legacy_step() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let out = legacy_pmim_step(&j, &v(&[0.5, 0.1]), 0.9, 0.3, &v(&[0.2, 0.0]), LEGACY_CLIP).unwrap();
        assert_eq!(out[0], 0.0);
        let s = v(&[0.3, -0.4]);
        assert_eq!(legacy_pmim_step(&j, &s, 1.0, 0.0, &v(&[0.0, 0.0]), LEGACY_CLIP).unwrap(), s);
    }

    #[test]
    fn legacy_step_matches_ecim_interior_update() {
        let j = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = QuadraticModel::new(j.clone(), v(&[0.0, 0.0]), 10.0).unwrap();
        let s = v(&[0.2, -0.3]);
        let zero = v(&[0.0, 0.0]);
        let legacy = legacy_pmim_step(&j, &s, 1.0, 0.1, &zero, LEGACY_CLIP).unwrap();
        let modern = ecim_step(&m, &s, 0.1, &zero).unwrap();
        assert!((legacy - modern).amax() < 1e-15);
    }

    #[test]
    fn gradient_mapping_reduces_to_gradient_in_interior() {
        let s = v(&[0.1, 0.2]);
        assert_eq!(gradient_mapping(&s, &s, 0.5), v(&[0.0, 0.0]));
        let m = QuadraticModel::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.5]), v(&[0.1, -0.1]), 10.0).unwrap();
        let next = ecim_step(&m, &s, 0.01, &v(&[0.0, 0.0])).unwrap();
        let g = gradient_mapping(&s, &next, 0.01);
        assert!((g - m.energy_gradient(&s).unwrap()).amax() < 1e-12);
    }

    #[test]
    fn noiseless_identity_coupling_converges_to_origin() {
        let m = QuadraticModel::new(DMatrix::identity(2, 2), v(&[0.0, 0.0]), 0.5).unwrap();
        let cfg = EcimConfig::new(Schedule::Fixed(0.5), 60);
        let trace = run_ecim(&m, &cfg, &v(&[0.5, -0.3])).unwrap();
        for w in trace.energies.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(trace.best_energy < 1e-30);
        assert!(trace.best_iterate_vec().amax() < 1e-15);
    }

    #[test]
    fn fixed_step_reaches_grid_optimum() {
        for seed in 0..5 {
            let m = psd_instance(seed);
            let l = crate::linalg::spectral_radius(&m.symmetric_coupling());
            let cfg = EcimConfig::new(Schedule::Fixed(1.0 / l), 2000);
            let s0 = random_box_point(2, 0.5, &mut ChaCha8Rng::seed_from_u64(seed));
            let trace = run_ecim(&m, &cfg, &s0).unwrap();
            let oracle = grid_minimize_box(&m, 1e-3).unwrap();
            assert!((trace.best_energy - oracle.value).abs() < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn decreasing_schedule_average_improves_with_horizon() {
        let m = psd_instance(3);
        let oracle = grid_minimize_box(&m, 1e-3).unwrap();
        let s0 = random_box_point(2, 0.5, &mut ChaCha8Rng::seed_from_u64(99));
        let gaps: Vec<f64> = [100, 1_000, 10_000]
            .iter()
            .map(|&k| {
                let t = run_ecim(&m, &EcimConfig::new(Schedule::Decreasing(1.0), k), &s0).unwrap();
                m.energy(&t.averaged_iterate_vec()).unwrap() - oracle.value
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn trace_invariants_and_projection_of_start() {
        let m = psd_instance(8);
        let cfg = EcimConfig::new(Schedule::Fixed(0.3), 50).with_noise(0.5, false).with_seed(4);
        let trace = run_ecim(&m, &cfg, &v(&[2.0, -0.1])).unwrap();
        assert!(trace.s0_projected);
        assert_eq!(trace.iterates.len(), 51);
        assert_eq!(trace.gm_norms.len(), 50);
        for (k, it) in trace.iterates.iter().enumerate() {
            assert!(it.iter().all(|x| x.abs() <= 0.5));
            assert!(trace.best_energy <= trace.energies[k]);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let m = psd_instance(2);
        let cfg = EcimConfig::new(Schedule::Decreasing(0.8), 300).with_noise(0.2, true).with_seed(77);
        let a = run_ecim(&m, &cfg, &v(&[0.1, 0.1])).unwrap();
        let b = run_ecim(&m, &cfg, &v(&[0.1, 0.1])).unwrap();
        assert_eq!(a, b);
        let other = run_ecim(&m, &cfg.clone().with_seed(78), &v(&[0.1, 0.1])).unwrap();
        assert_ne!(a.energies, other.energies);
    }

    #[test]
    fn divergence_is_reported() {
        // no box in practice: Δ huge, β far above 2/L
        let m = QuadraticModel::new(DMatrix::identity(1, 1) * -1.0, v(&[0.0]), 1e300).unwrap();
        let cfg = EcimConfig::new(Schedule::Fixed(10.0), 100);
        match run_ecim(&m, &cfg, &v(&[1.0])) {
            Err(Error::Diverged { iteration, .. }) => assert!(iteration > 0 && iteration < 100),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn summary_matches_trace() {
        let m = psd_instance(5);
        let cfg = EcimConfig::new(Schedule::Fixed(0.2), 200).with_noise(0.1, true).with_seed(1);
        let s0 = v(&[0.3, -0.3]);
        let t = run_ecim(&m, &cfg, &s0).unwrap();
        let s = minimize(&m, &cfg, &s0).unwrap();
        assert_eq!(s.best_energy, t.best_energy);
        assert_eq!(s.averaged_iterate, t.averaged_iterate_vec());
        assert_eq!(s.last_iterate, t.iterate(200));
    }

    #[test]
    fn early_stop_on_gradient_mapping() {
        let m = psd_instance(6);
        let mut cfg = EcimConfig::new(Schedule::Fixed(0.5), 100_000);
        cfg.gm_tol = 1e-10;
        let s = minimize(&m, &cfg, &v(&[0.0, 0.0])).unwrap();
        assert!(s.iterations_run < 100_000);
    }

    #[test]
    fn csv_export_columns() {
        let m = psd_instance(1);
        let t = run_ecim(&m, &EcimConfig::new(Schedule::Fixed(0.2), 3), &v(&[0.1, 0.2])).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,beta_k,energy,gm_norm,best_energy");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("3,,"));
        let back: EcimTrace = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
