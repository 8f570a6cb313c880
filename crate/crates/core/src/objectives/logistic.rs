use super::{Dataset, FiniteSumObjective, ObjectiveInfo};
use crate::error::{Error, Result};
use crate::linalg;

/// Multinomial logistic regression with an `l2` penalty.
///
/// The point is the `C × d` weight matrix flattened row-major (row `c` holds
/// the weights of class `c`). Component `i` is the softmax cross-entropy of
/// sample `i` plus `(l2/2)‖W‖²`.
#[derive(Debug, Clone)]
pub struct SoftmaxRegression {
    data: Dataset,
    l2: f64,
    info: ObjectiveInfo,
}

/// Builds the softmax cross-entropy objective over `dataset`.
///
/// The recorded smoothness constant `‖a_i‖² + l2` is an upper bound on the
/// true per-sample Hessian norm, which is at most `½‖a_i‖² + l2`.
pub fn make_logistic(dataset: Dataset, l2: f64) -> Result<SoftmaxRegression> {
    if dataset.is_empty() {
        return Err(Error::NoSamples);
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::invalid(format!("l2 must be nonnegative, got {l2}")));
    }
    if dataset.classes() < 2 {
        return Err(Error::invalid("classification needs at least two classes"));
    }
    let component_smoothness = (0..dataset.len())
        .map(|i| linalg::norm_sq(dataset.row(i)) + l2)
        .collect();
    Ok(SoftmaxRegression {
        info: ObjectiveInfo {
            component_smoothness: Some(component_smoothness),
            strong_convexity: Some(l2),
            minimizer: None,
            min_value: None,
            component_minima: None,
            convex: true,
        },
        data: dataset,
        l2,
    })
}

impl SoftmaxRegression {
    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn classes(&self) -> usize {
        self.data.classes()
    }

    /// Attaches numerically computed minimizer data (see [`super::solve`]).
    pub fn with_solution(mut self, minimizer: Vec<f64>, component_minima: Vec<f64>) -> Result<Self> {
        if minimizer.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: minimizer.len() });
        }
        if component_minima.len() != self.num_components() {
            return Err(Error::DimensionMismatch {
                expected: self.num_components(),
                got: component_minima.len(),
            });
        }
        self.info.min_value = Some(self.value(&minimizer));
        self.info.minimizer = Some(minimizer);
        self.info.component_minima = Some(component_minima);
        Ok(self)
    }

    /// Fraction of samples whose highest logit is the true class.
    pub fn accuracy(&self, w: &[f64]) -> f64 {
        let (c, d) = (self.classes(), self.data.dim());
        let correct = (0..self.data.len())
            .filter(|&i| {
                let a = self.data.row(i);
                let best = (0..c)
                    .map(|k| linalg::dot(&w[k * d..(k + 1) * d], a))
                    .enumerate()
                    .max_by(|x, y| x.1.total_cmp(&y.1))
                    .map(|(k, _)| k);
                best == Some(self.data.label(i))
            })
            .count();
        correct as f64 / self.data.len() as f64
    }
}

impl FiniteSumObjective for SoftmaxRegression {
    fn num_components(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.classes() * self.data.dim()
    }

    fn component_into(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64 {
        let (c, d) = (self.classes(), self.data.dim());
        let a = self.data.row(i);
        let y = self.data.label(i);

        // stack buffer unless there are many classes
        let mut logits = [0.0f64; 16];
        let mut heap;
        let logits: &mut [f64] = if c <= logits.len() {
            &mut logits[..c]
        } else {
            heap = vec![0.0; c];
            &mut heap
        };
        for (k, z) in logits.iter_mut().enumerate() {
            *z = linalg::dot(&w[k * d..(k + 1) * d], a);
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        // (max - z_y) >= 0 and ln(sum) >= 0, so the loss is nonnegative
        let cross_entropy = (max - logits[y]) + sum.ln();

        for k in 0..c {
            let p = (logits[k] - max).exp() / sum;
            let coeff = p - if k == y { 1.0 } else { 0.0 };
            let wk = &w[k * d..(k + 1) * d];
            let gk = &mut grad[k * d..(k + 1) * d];
            for j in 0..d {
                gk[j] = coeff * a[j] + self.l2 * wk[j];
            }
        }
        cross_entropy + 0.5 * self.l2 * linalg::norm_sq(w)
    }

    fn info(&self) -> &ObjectiveInfo {
        &self.info
    }
}
