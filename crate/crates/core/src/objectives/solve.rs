//! Deterministic solves for minimizers and per-component minima, and the
//! interpolation/position gaps built from them.

use super::FiniteSumObjective;
use crate::error::{Error, Result};
use crate::linalg;

/// Gradient-norm tolerance for deterministic solves.
pub const SOLVE_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200_000;
/// Iterations without a new best gradient norm after which a near-tolerance
/// solve is accepted as stalled at the rounding floor.
const STALL_WINDOW: usize = 1_000;
const STALL_FACTOR: f64 = 100.0;

/// Gradient descent with an Armijo backtracking line search whose initial
/// trial step is the Barzilai-Borwein step. Stops when `‖∇f‖ <= tol`.
///
/// `eval` writes the gradient and returns the value.
pub fn minimize(
    mut eval: impl FnMut(&[f64], &mut [f64]) -> f64,
    x0: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; d];
    let mut f = eval(&x, &mut g);
    let mut trial = vec![0.0; d];
    let mut g_trial = vec![0.0; d];
    let mut step = 1.0;
    let mut best = (f64::INFINITY, 0usize);
    for iteration in 0..MAX_ITERATIONS {
        let g2 = linalg::norm_sq(&g);
        if g2.sqrt() <= tol {
            return Ok(x);
        }
        if g2 < best.0 {
            best = (g2, iteration);
        } else if iteration - best.1 > STALL_WINDOW && best.0.sqrt() <= STALL_FACTOR * tol {
            return Ok(x);
        }
        if !f.is_finite() {
            return Err(Error::NoConvergence { residual: g2.sqrt(), iterations: iteration });
        }
        let mut gamma = step;
        let mut accepted = false;
        for _ in 0..80 {
            for j in 0..d {
                trial[j] = x[j] - gamma * g[j];
            }
            let f_trial = eval(&trial, &mut g_trial);
            // once decreases fall below rounding, a shrinking gradient decides
            let sufficient = f_trial <= f - 1e-4 * gamma * g2;
            let flat = f_trial <= f + 8.0 * f64::EPSILON * f.abs() && linalg::norm_sq(&g_trial) < g2;
            if sufficient || flat {
                // Barzilai-Borwein: s = -γg, y = g_trial - g
                let sy: f64 = (0..d).map(|j| -gamma * g[j] * (g_trial[j] - g[j])).sum();
                let ss = gamma * gamma * g2;
                step = if sy > 0.0 { ss / sy } else { 2.0 * gamma };
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut g, &mut g_trial);
                f = f_trial;
                accepted = true;
                break;
            }
            gamma *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { residual: g2.sqrt(), iterations: iteration });
        }
    }
    Err(Error::NoConvergence {
        residual: linalg::norm_sq(&g).sqrt(),
        iterations: MAX_ITERATIONS,
    })
}

/// `x^*` from metadata, otherwise a full-gradient solve from the origin.
pub fn full_minimizer<O: FiniteSumObjective + ?Sized>(obj: &O) -> Result<Vec<f64>> {
    if let Some(x) = &obj.info().minimizer {
        return Ok(x.clone());
    }
    minimize(|x, g| obj.full_into(x, g), &vec![0.0; obj.dim()], SOLVE_TOLERANCE)
}

/// `f_i^*` for every component, from metadata or per-component solves
/// started at `start`.
pub fn component_minima<O: FiniteSumObjective + ?Sized>(obj: &O, start: &[f64]) -> Result<Vec<f64>> {
    if let Some(m) = &obj.info().component_minima {
        return Ok(m.clone());
    }
    (0..obj.num_components())
        .map(|i| {
            let xi = minimize(|x, g| obj.component_into(i, x, g), start, SOLVE_TOLERANCE)?;
            Ok(obj.component_value(i, &xi))
        })
        .collect()
}

/// Interpolation gap `Δ_int = mean_i [f_i(x^*) - f_i^*]` and position gap
/// `Δ_pos = mean_i f_i^*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deltas {
    pub interpolation: f64,
    pub position: f64,
}

pub fn compute_deltas<O: FiniteSumObjective + ?Sized>(obj: &O) -> Result<Deltas> {
    let x_star = full_minimizer(obj)?;
    let minima = component_minima(obj, &x_star)?;
    let n = obj.num_components() as f64;
    let interpolation = minima
        .iter()
        .enumerate()
        .map(|(i, m)| (obj.component_value(i, &x_star) - m).max(0.0))
        .sum::<f64>()
        / n;
    let position = minima.iter().sum::<f64>() / n;
    Ok(Deltas { interpolation, position })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::*;

    #[test]
    fn two_quadratics_gaps() {
        let d = compute_deltas(&make_two_quadratics()).unwrap();
        assert_eq!(d, Deltas { interpolation: 0.5, position: 0.0 });
    }

    #[test]
    fn noiseless_regression_gaps() {
        let d = compute_deltas(&make_linear_regression(4, 50, 2, 0.0).unwrap()).unwrap();
        assert!(d.interpolation < 1e-20);
        assert_eq!(d.position, 0.0);
    }

    #[test]
    fn single_quadratic_gaps() {
        let d = compute_deltas(&make_quadratic1d(1.2, 0.0, 0.1).unwrap()).unwrap();
        assert_eq!(d, Deltas { interpolation: 0.0, position: 0.1 });
    }

    #[test]
    fn logistic_solves_reach_tolerance() {
        let ds = gaussian_blobs(30, 3, 3, 4, 2.0).unwrap();
        let obj = make_logistic(ds, 0.05).unwrap();
        let x_star = full_minimizer(&obj).unwrap();
        assert!(obj.full(&x_star).grad_sq_norm().sqrt() <= SOLVE_TOLERANCE);
        let minima = component_minima(&obj, &x_star).unwrap();
        assert!(minima.iter().all(|m| *m > 0.0));
        let d = compute_deltas(&obj).unwrap();
        assert!(d.interpolation > 0.0 && d.position > 0.0);
    }

    #[test]
    fn unbounded_objective_reports_residual() {
        match minimize(|x, g| { g[0] = 1.0; x[0] }, &[0.0], SOLVE_TOLERANCE) {
            Err(Error::NoConvergence { residual, .. }) => assert_eq!(residual, 1.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
