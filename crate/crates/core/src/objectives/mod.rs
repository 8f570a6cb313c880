//! Finite-sum objectives `f(x) = (1/N) Σ f_i(x)` with nonnegative components.
//!
//! Every problem implements [`FiniteSumObjective`]. Analytic facts that the
//! theory needs (smoothness, strong convexity, minimizers, per-component
//! minima) travel alongside in [`ObjectiveInfo`]; anything not known in closed
//! form is left `None` and obtained numerically by [`solve`].

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::linalg;

mod dataset;
mod gradcheck;
mod logistic;
mod nonconvex;
mod problem;
mod quadratic;
mod regression;
pub mod solve;

pub use dataset::{gaussian_blobs, load_csv, load_libsvm, read_libsvm, write_libsvm, write_libsvm_rows, Dataset, SparseSamples};
pub use gradcheck::{finite_difference_gradient, gradient_relative_error, scaled_finite_difference_gradient};
pub use logistic::{make_logistic, SoftmaxRegression};
pub use nonconvex::{make_nonconvex_sum, NonconvexSum, DEFAULT_CURVATURE};
pub use problem::ProblemSpec;
pub use quadratic::{make_quadratic1d, make_two_quadratics, QuadraticSum};
pub use regression::{make_linear_regression, LinearRegression};
pub use problem::DataSource;
pub use solve::{component_minima, compute_deltas, full_minimizer, Deltas};

/// Losses below this value are replaced by it wherever a stepsize divides by
/// the loss. Recorded losses are never modified.
pub const VALUE_FLOOR: f64 = 1e-12;

/// A point in `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

/// Value and gradient of one component (or of a batch mean) at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentEval {
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl ComponentEval {
    pub fn grad_sq_norm(&self) -> f64 {
        linalg::norm_sq(&self.gradient)
    }
}

/// Analytic metadata attached to an objective. Fields are `None` when the
/// quantity is not available in closed form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectiveInfo {
    /// Per-component smoothness constants `L_i` (upper bounds).
    pub component_smoothness: Option<Vec<f64>>,
    /// Strong-convexity modulus of the full objective; `Some(0.0)` for convex.
    pub strong_convexity: Option<f64>,
    pub minimizer: Option<Vec<f64>>,
    pub min_value: Option<f64>,
    /// Per-component minimum values `f_i^*`.
    pub component_minima: Option<Vec<f64>>,
    /// Every component is convex.
    pub convex: bool,
}

impl ObjectiveInfo {
    /// `L = max_i L_i`.
    pub fn smoothness(&self) -> Option<f64> {
        self.component_smoothness
            .as_ref()
            .map(|ls| ls.iter().copied().fold(0.0, f64::max))
    }
}

/// A finite sum of nonnegative differentiable components.
///
/// Implementations are immutable after construction, so a shared reference
/// may be evaluated from several threads at once.
pub trait FiniteSumObjective: Send + Sync {
    fn num_components(&self) -> usize;

    fn dim(&self) -> usize;

    /// Writes `∇f_i(x)` into `grad` (overwriting it) and returns `f_i(x)`.
    fn component_into(&self, i: usize, x: &[f64], grad: &mut [f64]) -> f64;

    fn info(&self) -> &ObjectiveInfo;

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let mut grad = vec![0.0; self.dim()];
        self.component_into(i, x, &mut grad)
    }

    fn component(&self, i: usize, x: &[f64]) -> ComponentEval {
        let mut gradient = vec![0.0; self.dim()];
        let value = self.component_into(i, x, &mut gradient);
        ComponentEval { value, gradient }
    }

    /// Mean value and gradient over `ids`; a batch is treated as a single
    /// component of the finite sum.
    fn batch_into(&self, ids: &[usize], x: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert!(!ids.is_empty());
        if let [single] = ids {
            return self.component_into(*single, x, grad);
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut scratch = vec![0.0; self.dim()];
        let mut total = 0.0;
        for &i in ids {
            total += self.component_into(i, x, &mut scratch);
            linalg::axpy(1.0, &scratch, grad);
        }
        let inv = 1.0 / ids.len() as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        total * inv
    }

    fn full_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let ids: Vec<usize> = (0..self.num_components()).collect();
        self.batch_into(&ids, x, grad)
    }

    fn full(&self, x: &[f64]) -> ComponentEval {
        let mut gradient = vec![0.0; self.dim()];
        let value = self.full_into(x, &mut gradient);
        ComponentEval { value, gradient }
    }

    fn value(&self, x: &[f64]) -> f64 {
        (0..self.num_components())
            .map(|i| self.component_value(i, x))
            .sum::<f64>()
            / self.num_components() as f64
    }
}

impl<T: FiniteSumObjective + ?Sized> FiniteSumObjective for Box<T> {
    fn num_components(&self) -> usize {
        (**self).num_components()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn component_into(&self, i: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).component_into(i, x, grad)
    }
    fn info(&self) -> &ObjectiveInfo {
        (**self).info()
    }
}
