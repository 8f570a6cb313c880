use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FiniteSumObjective, ObjectiveInfo};
use crate::error::{Error, Result};
use crate::linalg;

/// Least squares `f_i(x) = ½(a_iᵀx - b_i)^2`.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    features: Vec<f64>,
    targets: Vec<f64>,
    n: usize,
    d: usize,
    planted: Option<Vec<f64>>,
    hessian_eigen_range: Option<(f64, f64)>,
    info: ObjectiveInfo,
}

/// Gaussian features, a Gaussian planted predictor and optional label noise.
/// With `noise_std == 0` the problem interpolates.
pub fn make_linear_regression(d: usize, n: usize, seed: u64, noise_std: f64) -> Result<LinearRegression> {
    if d == 0 || n == 0 {
        return Err(Error::invalid("linear regression needs d >= 1 and N >= 1"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid(format!("noise_std must be nonnegative, got {noise_std}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let planted: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let targets: Vec<f64> = features
        .chunks_exact(d)
        .map(|row| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            linalg::dot(row, &planted) + noise_std * noise
        })
        .collect();
    let mut obj = LinearRegression::build(features, targets, n, d)?;
    if noise_std == 0.0 {
        obj.info.minimizer = Some(planted.clone());
        obj.info.min_value = Some(0.0);
    }
    obj.planted = Some(planted);
    Ok(obj)
}

impl LinearRegression {
    /// Builds the problem from explicit rows `a_i` and targets `b_i`.
    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::NoSamples);
        }
        if targets.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: targets.len() });
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::invalid("rows must have at least one feature"));
        }
        let mut features = Vec::with_capacity(n * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            features.extend_from_slice(row);
        }
        Self::build(features, targets, n, d)
    }

    fn build(features: Vec<f64>, targets: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if !linalg::all_finite(&features) || !linalg::all_finite(&targets) {
            return Err(Error::invalid("features and targets must be finite"));
        }
        let a = DMatrix::from_row_slice(n, d, &features);
        let b = DVector::from_column_slice(&targets);

        let component_smoothness: Vec<f64> = features.chunks_exact(d).map(linalg::norm_sq).collect();
        let component_minima: Vec<f64> = component_smoothness
            .iter()
            .zip(&targets)
            .map(|(&l, &t)| if l > 0.0 { 0.0 } else { 0.5 * t * t })
            .collect();

        // Hessian of the mean objective is AᵀA / N.
        let hessian = a.tr_mul(&a) / n as f64;
        let eig = nalgebra::SymmetricEigen::new(hessian.clone());
        let lo = eig.eigenvalues.min().max(0.0);
        let hi = eig.eigenvalues.max();

        let minimizer = match hessian.clone().cholesky() {
            Some(chol) if lo > 1e-12 * hi => chol.solve(&(a.tr_mul(&b) / n as f64)),
            _ => a
                .clone()
                .svd(true, true)
                .solve(&b, 1e-12 * hi.max(1.0) * n as f64)
                .map_err(|e| Error::invalid(format!("least-squares solve failed: {e}")))?,
        };
        let minimizer: Vec<f64> = minimizer.iter().copied().collect();

        let mut obj = LinearRegression {
            features,
            targets,
            n,
            d,
            planted: None,
            hessian_eigen_range: Some((lo, hi)),
            info: ObjectiveInfo {
                component_smoothness: Some(component_smoothness),
                strong_convexity: Some(if n >= d { lo } else { 0.0 }),
                minimizer: None,
                min_value: None,
                component_minima: Some(component_minima),
                convex: true,
            },
        };
        obj.info.min_value = Some(obj.value(&minimizer));
        obj.info.minimizer = Some(minimizer);
        Ok(obj)
    }

    pub fn planted(&self) -> Option<&[f64]> {
        self.planted.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Condition number of the full Hessian `AᵀA/N` (infinite when singular).
    pub fn hessian_condition_number(&self) -> f64 {
        match self.hessian_eigen_range {
            Some((lo, hi)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }
}

impl FiniteSumObjective for LinearRegression {
    fn num_components(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn component_into(&self, i: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let row = self.row(i);
        let r = linalg::dot(row, x) - self.targets[i];
        for (g, a) in grad.iter_mut().zip(row) {
            *g = r * a;
        }
        0.5 * r * r
    }

    fn info(&self) -> &ObjectiveInfo {
        &self.info
    }
}
