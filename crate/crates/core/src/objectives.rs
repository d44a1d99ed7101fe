//! Test problems with analytic derivatives, derivative checkers, and
//! estimators for the constants that appear in the convergence bounds.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ecim::EcimTrace;
use crate::error::Result;
use crate::linalg;
use crate::model::{Objective, QuadraticModel};

/// Seed of the synthetic logistic-regression dataset.
pub const LOGISTIC_SEED: u64 = 20_240_517;
pub const LOGISTIC_SAMPLES: usize = 40;

/// Corner enumeration for `G` is used up to this dimension.
pub const CORNER_ENUMERATION_MAX_DIM: usize = 20;

/// Iterates whose gap is below this are skipped when estimating `μ_p`.
pub const MU_P_GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvexityClass {
    StronglyConvex,
    Convex,
    InvexLike,
    Nonconvex,
}

#[derive(Debug, Clone)]
pub struct TestProblem {
    pub name: String,
    pub objective: Objective,
    pub start: DVector<f64>,
    pub convexity: ConvexityClass,
    /// Trust-region scaling from the Hessian diagonal is advisable.
    pub ill_scaled: bool,
}

impl TestProblem {
    pub fn known_optimum(&self) -> Option<(&DVector<f64>, f64)> {
        self.objective.optimum()
    }
}

/// `f(θ) = ½θᵀAθ + bᵀθ` with optimum `-A⁻¹b` when `A ≻ 0`.
pub fn quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Objective {
    let n = b.len();
    let a = linalg::symmetric_part(&a);
    let optimum = a.clone().cholesky().map(|c| {
        let theta = -c.solve(&b);
        let value = 0.5 * b.dot(&theta);
        (theta, value)
    });
    let (a1, b1) = (a.clone(), b.clone());
    let (a2, b2) = (a.clone(), b);
    let a3 = a;
    let f = Objective::new(
        n,
        move |t| 0.5 * t.dot(&(&a1 * t)) + b1.dot(t),
        move |t| &a2 * t + &b2,
        move |_| a3.clone(),
    );
    match optimum {
        Some((theta, value)) => f.with_optimum(theta, value),
        None => f,
    }
}

/// Chained Rosenbrock `Σ b(x_{i+1} - x_i²)² + (a - x_i)²`.
pub fn rosenbrock(n: usize, a: f64, b: f64) -> Objective {
    assert!(n >= 2, "Rosenbrock needs n >= 2");
    let value = move |x: &DVector<f64>| {
        (0..n - 1)
            .map(|i| {
                let r = x[i + 1] - x[i] * x[i];
                b * r * r + (a - x[i]) * (a - x[i])
            })
            .sum()
    };
    let gradient = move |x: &DVector<f64>| {
        let mut g = DVector::zeros(n);
        for i in 0..n - 1 {
            let r = x[i + 1] - x[i] * x[i];
            g[i] += -4.0 * b * x[i] * r - 2.0 * (a - x[i]);
            g[i + 1] += 2.0 * b * r;
        }
        g
    };
    let hessian = move |x: &DVector<f64>| {
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            h[(i, i)] += 12.0 * b * x[i] * x[i] - 4.0 * b * x[i + 1] + 2.0;
            h[(i + 1, i + 1)] += 2.0 * b;
            h[(i, i + 1)] -= 4.0 * b * x[i];
            h[(i + 1, i)] -= 4.0 * b * x[i];
        }
        h
    };
    let f = Objective::new(n, value, gradient, hessian);
    if a == 1.0 {
        f.with_optimum(DVector::from_element(n, 1.0), 0.0)
    } else {
        f
    }
}

/// Two overlapping Gaussian classes in the plane, 20 samples each.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticDataset {
    pub features: Vec<[f64; 2]>,
    pub labels: Vec<f64>,
}

impl LogisticDataset {
    pub fn synthetic(seed: u64, samples: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::with_capacity(samples);
        let mut labels = Vec::with_capacity(samples);
        for i in 0..samples {
            let label = (i % 2) as f64;
            let centre = if label == 1.0 { [0.5, 0.25] } else { [-0.5, -0.25] };
            let x0: f64 = StandardNormal.sample(&mut rng);
            let x1: f64 = StandardNormal.sample(&mut rng);
            features.push([centre[0] + x0, centre[1] + x1]);
            labels.push(label);
        }
        Self { features, labels }
    }

    /// CSV with columns `x1,x2,y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x1", "x2", "y"])?;
        for (x, y) in self.features.iter().zip(&self.labels) {
            w.serialize((x[0], x[1], *y))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean logistic loss over `θ = (w₁, w₂, bias)`.
pub fn logistic(data: LogisticDataset) -> Objective {
    let m = data.labels.len() as f64;
    let rows: Vec<([f64; 3], f64)> = data
        .features
        .iter()
        .zip(&data.labels)
        .map(|(x, y)| ([x[0], x[1], 1.0], *y))
        .collect();
    let dot = |x: &[f64; 3], t: &DVector<f64>| x[0] * t[0] + x[1] * t[1] + x[2] * t[2];
    let r1 = rows.clone();
    let r2 = rows.clone();
    let r3 = rows;
    Objective::new(
        3,
        move |t| r1.iter().map(|(x, y)| softplus(dot(x, t)) - y * dot(x, t)).sum::<f64>() / m,
        move |t| {
            let mut g = DVector::zeros(3);
            for (x, y) in &r2 {
                let c = sigmoid(dot(x, t)) - y;
                for i in 0..3 {
                    g[i] += c * x[i];
                }
            }
            g / m
        },
        move |t| {
            let mut h = DMatrix::zeros(3, 3);
            for (x, _) in &r3 {
                let p = sigmoid(dot(x, t));
                let w = p * (1.0 - p);
                for i in 0..3 {
                    for j in 0..3 {
                        h[(i, j)] += w * x[i] * x[j];
                    }
                }
            }
            h / m
        },
    )
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut *rng));
    m.transpose() * &m / n as f64 + DMatrix::identity(n, n)
}

fn seeded_quadratic(name: &str, n: usize, seed: u64) -> TestProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_spd(n, &mut rng);
    let b = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let start = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    TestProblem {
        name: name.into(),
        objective: quadratic(a, b),
        start,
        convexity: ConvexityClass::StronglyConvex,
        ill_scaled: false,
    }
}

/// The standard problem suite.
pub fn problem_suite() -> Vec<TestProblem> {
    let alternating = |n: usize| DVector::from_fn(n, |i, _| if i % 2 == 0 { -1.2 } else { 1.0 });
    let ill = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e4f64.powf(1.0 / 3.0), 1e4f64.powf(2.0 / 3.0), 1e4]));
    vec![
        seeded_quadratic("quadratic2", 2, 2),
        seeded_quadratic("quadratic5", 5, 5),
        seeded_quadratic("quadratic20", 20, 20),
        TestProblem {
            name: "rosenbrock2".into(),
            objective: rosenbrock(2, 1.0, 100.0),
            start: alternating(2),
            convexity: ConvexityClass::Nonconvex,
            ill_scaled: false,
        },
        TestProblem {
            name: "rosenbrock10".into(),
            objective: rosenbrock(10, 1.0, 100.0),
            start: alternating(10),
            convexity: ConvexityClass::Nonconvex,
            ill_scaled: false,
        },
        TestProblem {
            name: "logistic".into(),
            objective: logistic(LogisticDataset::synthetic(LOGISTIC_SEED, LOGISTIC_SAMPLES)),
            start: DVector::zeros(3),
            convexity: ConvexityClass::InvexLike,
            ill_scaled: false,
        },
        TestProblem {
            name: "illscaled".into(),
            objective: quadratic(ill, DVector::from_vec(vec![1.0, -2.0, 3.0, -4.0])),
            start: DVector::from_element(4, 1.0),
            convexity: ConvexityClass::StronglyConvex,
            ill_scaled: true,
        },
    ]
}

pub fn find_problem(name: &str) -> Option<TestProblem> {
    problem_suite().into_iter().find(|p| p.name == name)
}

/// Largest relative errors of the analytic derivatives against central
/// differences. Relative errors use a unit floor on the denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub grad_err: f64,
    pub hess_err: f64,
}

pub fn finite_diff_check(objective: &Objective, theta: &DVector<f64>, step: f64) -> Result<FdReport> {
    let n = objective.dim();
    let grad = objective.gradient(theta)?;
    let hess = objective.hessian(theta)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let mut grad_err = 0.0f64;
    let mut hess_err = 0.0f64;
    let mut x = theta.clone();
    for j in 0..n {
        let orig = x[j];
        x[j] = orig + step;
        let fp = objective.value(&x)?;
        let gp = objective.gradient(&x)?;
        x[j] = orig - step;
        let fm = objective.value(&x)?;
        let gm = objective.gradient(&x)?;
        x[j] = orig;
        grad_err = grad_err.max(rel(grad[j], (fp - fm) / (2.0 * step)));
        for i in 0..n {
            hess_err = hess_err.max(rel(hess[(i, j)], (gp[i] - gm[i]) / (2.0 * step)));
        }
    }
    Ok(FdReport { grad_err, hess_err })
}

/// Constants of a quadratic subproblem that enter the convergence bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimates {
    /// Bound on `‖∇E‖₂` over the box.
    pub g_bound: f64,
    /// Lipschitz constant of `∇E`, `max |eig(S)|`.
    pub lipschitz: f64,
    /// PL constant, `min eig(S)` when `S ≻ 0`.
    pub mu: Option<f64>,
    /// Empirical gradient-mapping PL constant.
    pub mu_p: Option<f64>,
}

pub fn estimate_constants(model: &QuadraticModel) -> ConstantEstimates {
    let n = model.dim();
    let sym = model.symmetric_coupling();
    let eig = linalg::sorted_eigenvalues(&sym);
    let lipschitz = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lmin = eig.first().copied().unwrap_or(0.0);
    let mu = (lmin > 1e-12 * lipschitz.max(1.0)).then_some(lmin);
    let delta = model.delta();
    let field = model.field();

    let g_bound = if n <= CORNER_ENUMERATION_MAX_DIM {
        let mut worst = 0.0f64;
        let mut corner = DVector::zeros(n);
        for mask in 0u64..(1u64 << n) {
            for i in 0..n {
                corner[i] = if mask >> i & 1 == 1 { delta } else { -delta };
            }
            worst = worst.max((&sym * &corner + field).norm());
        }
        worst
    } else {
        lipschitz * delta * (n as f64).sqrt() + field.norm()
    };

    ConstantEstimates { g_bound, lipschitz, mu, mu_p: None }
}

/// `min_k ‖g(k)‖² / (2(E(s(k)) - E*))` over the steps of `trace`,
/// skipping iterates whose gap is below [`MU_P_GAP_FLOOR`].
pub fn estimate_mu_p(trace: &EcimTrace, e_star: f64) -> Option<f64> {
    trace
        .gm_norms
        .iter()
        .zip(&trace.energies)
        .filter_map(|(g, e)| {
            let gap = e - e_star;
            (gap >= MU_P_GAP_FLOOR).then(|| g * g / (2.0 * gap))
        })
        .min_by(f64::total_cmp)
}
