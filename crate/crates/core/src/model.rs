//! The box-constrained quadratic subproblem (Ising energy) and the outer
//! objective it is built from.
//!
//! A [`QuadraticModel`] holds `E(s) = ½⟨s, Js⟩ + ⟨h, s⟩` over the box
//! `‖s‖_∞ ≤ Δ`. The coupling `J` need not be symmetric; the gradient uses
//! `(J + Jᵀ)/2`. An optional diagonal scaling `D` turns the box into a box on
//! `u = D·p`, which is how elliptical trust regions are realised.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Relative tolerance on `max |H - Hᵀ|` before a Hessian is rejected.
pub const HESSIAN_SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    coupling: DMatrix<f64>,
    field: DVector<f64>,
    delta: f64,
    scaling: Option<DVector<f64>>,
}

impl QuadraticModel {
    pub fn new(coupling: DMatrix<f64>, field: DVector<f64>, delta: f64) -> Result<Self> {
        if !coupling.is_square() {
            return Err(Error::InvalidArgument(format!(
                "coupling must be square, got {}x{}",
                coupling.nrows(),
                coupling.ncols()
            )));
        }
        check_dim(coupling.nrows(), field.len())?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("box half-width must be positive, got {delta}")));
        }
        Ok(Self { coupling, field, delta, scaling: None })
    }

    /// Attach a diagonal trust-region scaling `D = diag(d)`.
    ///
    /// The solver works in `u = D·p`, so every entry must be strictly positive.
    pub fn with_scaling(mut self, d: DVector<f64>) -> Result<Self> {
        check_dim(self.dim(), d.len())?;
        if d.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("scaling entries must be positive and finite".into()));
        }
        self.scaling = Some(d);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.field.len()
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn field(&self) -> &DVector<f64> {
        &self.field
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn scaling(&self) -> Option<&DVector<f64>> {
        self.scaling.as_ref()
    }

    /// `(J + Jᵀ)/2`.
    pub fn symmetric_coupling(&self) -> DMatrix<f64> {
        linalg::symmetric_part(&self.coupling)
    }

    /// Same model with a different box half-width.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        let mut m = Self::new(self.coupling.clone(), self.field.clone(), delta)?;
        m.scaling = self.scaling.clone();
        Ok(m)
    }

    /// `E(s) = ½·sᵀJs + hᵀs`, evaluated with `J` as stored.
    pub fn energy(&self, s: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), s.len())?;
        Ok(0.5 * s.dot(&(&self.coupling * s)) + self.field.dot(s))
    }

    /// `∇E(s) = ½(J + Jᵀ)s + h`.
    pub fn energy_gradient(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), s.len())?;
        let js = &self.coupling * s;
        let jts = self.coupling.tr_mul(s);
        Ok((js + jts) * 0.5 + &self.field)
    }

    /// Trust-region model `m(p) = hᵀp + ½·pᵀSp` with `S` the symmetric part of `J`.
    pub fn model_value(&self, p: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), p.len())?;
        let s = self.symmetric_coupling();
        Ok(self.field.dot(p) + 0.5 * p.dot(&(&s * p)))
    }

    /// The model expressed in scaled coordinates `u = D·p`:
    /// `J ← D⁻¹JD⁻¹`, `h ← D⁻¹h`, same half-width, no scaling attached.
    /// Without scaling this is a plain clone.
    pub fn scaled(&self) -> Self {
        match &self.scaling {
            None => self.clone(),
            Some(d) => {
                let n = self.dim();
                let inv: DVector<f64> = d.map(|v| 1.0 / v);
                let coupling = DMatrix::from_fn(n, n, |i, j| self.coupling[(i, j)] * inv[i] * inv[j]);
                let field = self.field.component_mul(&inv);
                Self { coupling, field, delta: self.delta, scaling: None }
            }
        }
    }

    /// Map a scaled-coordinate solution back: `p = D⁻¹u`.
    pub fn unscale(&self, u: &DVector<f64>) -> DVector<f64> {
        match &self.scaling {
            None => u.clone(),
            Some(d) => u.component_div(d),
        }
    }
}

pub type ValueFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// An unconstrained objective `f: ℝⁿ → ℝ` with gradient and Hessian.
#[derive(Clone)]
pub struct Objective {
    dim: usize,
    value: ValueFn,
    gradient: GradientFn,
    hessian: HessianFn,
    optimum: Option<(DVector<f64>, f64)>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("dim", &self.dim)
            .field("optimum", &self.optimum)
            .finish_non_exhaustive()
    }
}

impl Objective {
    pub fn new<V, G, H>(dim: usize, value: V, gradient: G, hessian: H) -> Self
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        H: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        assert!(dim > 0, "objective dimension must be positive");
        Self {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            optimum: None,
        }
    }

    /// Objective whose Hessian is taken by central differences of the gradient.
    pub fn with_fd_hessian<V, G>(dim: usize, value: V, gradient: G, step: f64) -> Self
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        let gradient: GradientFn = Arc::new(gradient);
        let g = Arc::clone(&gradient);
        let hessian: HessianFn = Arc::new(move |theta: &DVector<f64>| fd_jacobian(&*g, theta, step));
        Self { dim, value: Arc::new(value), gradient, hessian, optimum: None }
    }

    pub fn with_optimum(mut self, theta: DVector<f64>, value: f64) -> Self {
        assert_eq!(theta.len(), self.dim);
        self.optimum = Some((theta, value));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn optimum(&self) -> Option<(&DVector<f64>, f64)> {
        self.optimum.as_ref().map(|(t, v)| (t, *v))
    }

    pub fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim, theta.len())?;
        Ok((self.value)(theta))
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, theta.len())?;
        let g = (self.gradient)(theta);
        check_dim(self.dim, g.len())?;
        Ok(g)
    }

    /// Hessian at `theta`, symmetrised. Rejects matrices whose asymmetry
    /// exceeds [`HESSIAN_SYMMETRY_TOL`] relative to their largest entry.
    pub fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim, theta.len())?;
        let h = (self.hessian)(theta);
        if h.nrows() != self.dim || h.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: h.nrows() });
        }
        let scale = h.amax().max(1.0);
        let asym = linalg::asymmetry(&h);
        if asym > HESSIAN_SYMMETRY_TOL * scale {
            return Err(Error::InvalidArgument(format!("Hessian is not symmetric (max |H - Hᵀ| = {asym:e})")));
        }
        Ok(linalg::symmetric_part(&h))
    }

    /// Same objective with the gradient replaced. Used to inject faults in tests.
    pub fn replace_gradient<G>(&self, gradient: G) -> Self
    where
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        let mut o = self.clone();
        o.gradient = Arc::new(gradient);
        o
    }
}

/// Central-difference Jacobian of `g`, symmetrised.
fn fd_jacobian(g: &(dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync), theta: &DVector<f64>, step: f64) -> DMatrix<f64> {
    let n = theta.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut x = theta.clone();
    for j in 0..n {
        let orig = x[j];
        x[j] = orig + step;
        let gp = g(&x);
        x[j] = orig - step;
        let gm = g(&x);
        x[j] = orig;
        jac.set_column(j, &((gp - gm) / (2.0 * step)));
    }
    linalg::symmetric_part(&jac)
}

/// Build the trust-region subproblem at `theta`: `J = H(θ)`, `h = ∇f(θ)`, `Δ = δ`.
pub fn build_subproblem(
    objective: &Objective,
    theta: &DVector<f64>,
    delta: f64,
    scaling: Option<&DVector<f64>>,
) -> Result<QuadraticModel> {
    let h = objective.hessian(theta)?;
    let g = objective.gradient(theta)?;
    let model = QuadraticModel::new(h, g, delta)?;
    match scaling {
        Some(d) => model.with_scaling(d.clone()),
        None => Ok(model),
    }
}
