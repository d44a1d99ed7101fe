//! Reference solvers used to check the ECIM and the trust-region driver.
//!
//! * [`grid_minimize_box`] exhaustively searches a lattice on `[-Δ, Δ]ⁿ`
//!   and polishes the best lattice point with projected gradient steps.
//! * [`exact_ball_minimize`] solves `min ⟨g,p⟩ + ½⟨p,Hp⟩, ‖p‖₂ ≤ δ` through an
//!   eigendecomposition and a bisection on the secular equation, including
//!   the hard case.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::ecim::project_box_in_place;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::QuadraticModel;

/// Largest dimension accepted by the lattice search.
pub const GRID_MAX_DIM: usize = 4;
/// Largest number of lattice points evaluated in one search.
pub const GRID_MAX_POINTS: u64 = 50_000_000;
/// Projected-gradient polish steps after the lattice search.
pub const DEFAULT_POLISH_STEPS: usize = 100;
const BISECTION_MAX_ITER: usize = 200;
const BISECTION_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMethod {
    Grid,
    ExactBall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub s_star: DVector<f64>,
    pub value: f64,
    pub method: OracleMethod,
    /// Lattice spacing (grid only).
    pub resolution: Option<f64>,
    /// Ball-constraint multiplier `λ` (exact ball only).
    pub multiplier: Option<f64>,
}

/// Lattice search at `resolution` followed by [`DEFAULT_POLISH_STEPS`] polish steps.
pub fn grid_minimize_box(model: &QuadraticModel, resolution: f64) -> Result<OracleSolution> {
    grid_minimize_box_with(model, resolution, DEFAULT_POLISH_STEPS)
}

/// Lattice search with a configurable number of polish steps at `β = 1/L`.
///
/// Ties between lattice points go to the lexicographically smallest index.
pub fn grid_minimize_box_with(model: &QuadraticModel, resolution: f64, polish_steps: usize) -> Result<OracleSolution> {
    let n = model.dim();
    if n > GRID_MAX_DIM {
        return Err(Error::Capability(format!("grid oracle supports n <= {GRID_MAX_DIM}, got n = {n}")));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid resolution must be positive, got {resolution}")));
    }
    let delta = model.delta();
    let cells = (2.0 * delta / resolution).ceil().max(1.0) as u64;
    let per_axis = cells + 1;
    let total = (per_axis as f64).powi(n as i32);
    if total > GRID_MAX_POINTS as f64 {
        return Err(Error::Capability(format!(
            "grid of {per_axis}^{n} points exceeds the limit of {GRID_MAX_POINTS}; use a coarser resolution"
        )));
    }
    let spacing = 2.0 * delta / cells as f64;
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| if i == cells { delta } else { -delta + i as f64 * spacing })
        .collect();

    let sym = model.symmetric_coupling();
    let field = model.field();
    let energy = |s: &DVector<f64>| 0.5 * s.dot(&(&sym * s)) + field.dot(s);

    let mut index = vec![0usize; n];
    let mut point = DVector::from_element(n, -delta);
    let mut best_value = f64::INFINITY;
    let mut best = point.clone();
    'lattice: loop {
        let e = energy(&point);
        if e < best_value {
            best_value = e;
            best.copy_from(&point);
        }
        // odometer, last coordinate fastest
        let mut d = n;
        loop {
            if d == 0 {
                break 'lattice;
            }
            d -= 1;
            index[d] += 1;
            if (index[d] as u64) < per_axis {
                point[d] = axis[index[d]];
                break;
            }
            index[d] = 0;
            point[d] = axis[0];
        }
    }

    let lipschitz = linalg::spectral_radius(&sym);
    if lipschitz > 0.0 && polish_steps > 0 {
        let beta = 1.0 / lipschitz;
        let mut s = best.clone();
        for _ in 0..polish_steps {
            let grad = &sym * &s + field;
            let mut next = &s - grad * beta;
            project_box_in_place(&mut next, delta);
            if next == s {
                break;
            }
            s = next;
        }
        let e = energy(&s);
        if e < best_value {
            best_value = e;
            best = s;
        }
    }

    Ok(OracleSolution {
        s_star: best,
        value: best_value,
        method: OracleMethod::Grid,
        resolution: Some(spacing),
        multiplier: None,
    })
}

/// Exact minimiser of `⟨g,p⟩ + ½⟨p,Hp⟩` over the ball `‖p‖₂ ≤ δ`.
pub fn exact_ball_minimize(g: &DVector<f64>, h: &DMatrix<f64>, delta: f64) -> Result<OracleSolution> {
    let n = g.len();
    if !h.is_square() {
        return Err(Error::InvalidArgument("Hessian must be square".into()));
    }
    check_dim(n, h.nrows())?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {delta}")));
    }
    if linalg::asymmetry(h) > 1e-10 * h.amax().max(1.0) {
        return Err(Error::InvalidArgument("exact ball solver needs a symmetric H".into()));
    }
    let sym = linalg::symmetric_part(h);
    let model_value = |p: &DVector<f64>| g.dot(p) + 0.5 * p.dot(&(&sym * p));
    let solution = |p: DVector<f64>, lambda: f64| {
        let value = model_value(&p);
        OracleSolution {
            s_star: p,
            value,
            method: OracleMethod::ExactBall,
            resolution: None,
            multiplier: Some(lambda),
        }
    };

    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambdas: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors: Vec<DVector<f64>> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let ghat: Vec<f64> = vectors.iter().map(|q| q.dot(g)).collect();
    let gnorm = g.norm();
    let lmin = lambdas.first().copied().unwrap_or(0.0);

    let step_for = |lambda: f64, skip: &dyn Fn(usize) -> bool| {
        let mut p = DVector::zeros(n);
        for i in 0..n {
            if !skip(i) {
                p.axpy(-ghat[i] / (lambdas[i] + lambda), &vectors[i], 1.0);
            }
        }
        p
    };

    if gnorm == 0.0 {
        return Ok(if lmin >= 0.0 {
            solution(DVector::zeros(n), 0.0)
        } else {
            solution(&vectors[0] * delta, -lmin)
        });
    }

    let scale = lambdas.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let eps_lambda = 1e-12 * scale;
    let eps_g = 1e-10 * gnorm;
    let lo = (-lmin).max(0.0);
    let singular = |i: usize| lambdas[i] + lo <= eps_lambda;

    // Interior Newton step, or the hard case when g has no weight on the
    // eigenvectors that become singular at λ = lo.
    if (0..n).filter(|&i| singular(i)).all(|i| ghat[i].abs() <= eps_g) {
        let p_lo = step_for(lo, &singular);
        let norm = p_lo.norm();
        if norm <= delta {
            if lo == 0.0 {
                return Ok(solution(p_lo, 0.0));
            }
            let tau = (delta * delta - norm * norm).max(0.0).sqrt();
            return Ok(solution(p_lo + &vectors[0] * tau, lo));
        }
    }

    let norm_at = |lambda: f64| {
        (0..n)
            .map(|i| {
                let c = ghat[i] / (lambdas[i] + lambda);
                c * c
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut a = lo;
    let mut b = lo + gnorm / delta;
    let mut converged = false;
    for _ in 0..BISECTION_MAX_ITER {
        if b - a <= BISECTION_RTOL * b.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            converged = true;
            break;
        }
        if norm_at(mid) > delta {
            a = mid;
        } else {
            b = mid;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!("secular equation bisection did not converge in {BISECTION_MAX_ITER} iterations")));
    }
    // b is on the feasible side of the root
    let mut p = step_for(b, &|_| false);
    let norm = p.norm();
    if norm > delta {
        p *= delta / norm;
    }
    Ok(solution(p, b))
}

/// Minimiser of the trust-region model of `model` over the ball of radius `Δ`.
pub fn exact_ball_for_model(model: &QuadraticModel) -> Result<OracleSolution> {
    exact_ball_minimize(model.field(), &model.symmetric_coupling(), model.delta())
}
