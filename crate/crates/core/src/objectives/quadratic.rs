use super::{FiniteSumObjective, ObjectiveInfo};
use crate::error::{Error, Result};

/// One-dimensional separable quadratics `f_i(x) = (a_i/2)(x - c_i)^2 + b_i`.
#[derive(Debug, Clone)]
pub struct QuadraticSum {
    curvatures: Vec<f64>,
    centers: Vec<f64>,
    offsets: Vec<f64>,
    info: ObjectiveInfo,
}

impl QuadraticSum {
    pub fn new(curvatures: Vec<f64>, centers: Vec<f64>, offsets: Vec<f64>) -> Result<Self> {
        let n = curvatures.len();
        if n == 0 {
            return Err(Error::invalid("at least one component is required"));
        }
        if centers.len() != n || offsets.len() != n {
            return Err(Error::invalid("curvatures, centers and offsets must have equal length"));
        }
        if let Some(a) = curvatures.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::invalid(format!("curvature must be positive, got {a}")));
        }
        if let Some(b) = offsets.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::invalid(format!("offset must be nonnegative, got {b}")));
        }
        if let Some(c) = centers.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("center must be finite, got {c}")));
        }

        let total: f64 = curvatures.iter().sum();
        let x_star = curvatures.iter().zip(&centers).map(|(a, c)| a * c).sum::<f64>() / total;
        let mut obj = QuadraticSum {
            info: ObjectiveInfo {
                component_smoothness: Some(curvatures.clone()),
                strong_convexity: Some(total / n as f64),
                minimizer: Some(vec![x_star]),
                min_value: None,
                component_minima: Some(offsets.clone()),
                convex: true,
            },
            curvatures,
            centers,
            offsets,
        };
        obj.info.min_value = Some(obj.value(&[x_star]));
        Ok(obj)
    }
}

/// `f(x) = (λ/2)(x - x*)^2 + f*`, a single component.
pub fn make_quadratic1d(lambda: f64, x_star: f64, f_star: f64) -> Result<QuadraticSum> {
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    if !(f_star >= 0.0) {
        return Err(Error::invalid(format!("f_star must be nonnegative, got {f_star}")));
    }
    let mut obj = QuadraticSum::new(vec![lambda], vec![x_star], vec![f_star])?;
    // exact values rather than the generic weighted-mean computation
    obj.info.minimizer = Some(vec![x_star]);
    obj.info.min_value = Some(f_star);
    Ok(obj)
}

/// `f_1(x) = (x-1)^2/2`, `f_2(x) = (x+1)^2/2`: no common minimizer.
pub fn make_two_quadratics() -> QuadraticSum {
    QuadraticSum::new(vec![1.0, 1.0], vec![1.0, -1.0], vec![0.0, 0.0])
        .expect("fixed parameters are valid")
}

impl FiniteSumObjective for QuadraticSum {
    fn num_components(&self) -> usize {
        self.curvatures.len()
    }

    fn dim(&self) -> usize {
        1
    }

    fn component_into(&self, i: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let r = x[0] - self.centers[i];
        let a = self.curvatures[i];
        grad[0] = a * r;
        0.5 * a * r * r + self.offsets[i]
    }

    fn info(&self) -> &ObjectiveInfo {
        &self.info
    }
}
