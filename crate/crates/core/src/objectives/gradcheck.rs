//! Central-difference gradients, used as an oracle independent of the
//! analytic derivatives.

use super::FiniteSumObjective;
use crate::linalg;

/// `(f_i(x + h e_j) - f_i(x - h e_j)) / 2h` for every coordinate `j`.
pub fn finite_difference_gradient<O: FiniteSumObjective + ?Sized>(obj: &O, i: usize, x: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    central_differences(obj, i, x, |_| h)
}

/// Central differences with per-coordinate step `base * (1 + |x_j|)`.
pub fn scaled_finite_difference_gradient<O: FiniteSumObjective + ?Sized>(
    obj: &O,
    i: usize,
    x: &[f64],
    base: f64,
) -> Vec<f64> {
    assert!(base > 0.0, "finite-difference step must be positive");
    central_differences(obj, i, x, |xj| base * (1.0 + xj.abs()))
}

fn central_differences<O: FiniteSumObjective + ?Sized>(
    obj: &O,
    i: usize,
    x: &[f64],
    step: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut scratch = vec![0.0; x.len()];
    (0..x.len())
        .map(|j| {
            let h = step(x[j]);
            probe[j] = x[j] + h;
            let plus = obj.component_into(i, &probe, &mut scratch);
            probe[j] = x[j] - h;
            let minus = obj.component_into(i, &probe, &mut scratch);
            probe[j] = x[j];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖ / max(1, ‖a‖, ‖b‖)`: relative error for large gradients and
/// absolute error near stationary points, where a relative measure is
/// meaningless.
pub fn gradient_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = linalg::norm_sq(a).sqrt().max(linalg::norm_sq(b).sqrt()).max(1.0);
    linalg::dist_sq(a, b).sqrt() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_quadratic1d, make_two_quadratics};

    #[test]
    fn quadratic_derivative() {
        let q = make_quadratic1d(2.0, 0.0, 0.0).unwrap();
        let g = finite_difference_gradient(&q, 0, &[1.0], 1e-6);
        assert!((g[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn vanishes_at_minimizer() {
        let q = make_two_quadratics();
        for i in 0..2 {
            let c = if i == 0 { 1.0 } else { -1.0 };
            let g = finite_difference_gradient(&q, i, &[c], 1e-6);
            assert!(g[0].abs() < 1e-9);
        }
    }

    #[test]
    fn error_measure() {
        assert_eq!(gradient_relative_error(&[0.0], &[0.0]), 0.0);
        assert!((gradient_relative_error(&[100.0], &[101.0]) - 1.0 / 101.0).abs() < 1e-15);
        assert!((gradient_relative_error(&[1e-3], &[0.0]) - 1e-3).abs() < 1e-15);
    }
}
