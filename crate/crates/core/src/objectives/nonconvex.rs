use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FiniteSumObjective, ObjectiveInfo};
use crate::error::{Error, Result};

pub const DEFAULT_CURVATURE: f64 = 0.1;

/// Scalar nonconvex sum `f_i(x) = 1 - cos(x - c_i) + (ε/2)(x - c_i)^2`.
///
/// Each component is nonnegative with minimum 0 at `c_i` and is
/// `(1 + ε)`-smooth; `f_i'' = cos(x - c_i) + ε` is negative near
/// `x - c_i = π` whenever `ε < 1`.
#[derive(Debug, Clone)]
pub struct NonconvexSum {
    centers: Vec<f64>,
    eps: f64,
    info: ObjectiveInfo,
}

/// Offsets `c_i` drawn uniformly from `[-3, 3]`, `ε` = [`DEFAULT_CURVATURE`].
pub fn make_nonconvex_sum(n: usize, seed: u64) -> Result<NonconvexSum> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    NonconvexSum::new(centers, DEFAULT_CURVATURE)
}

impl NonconvexSum {
    pub fn new(centers: Vec<f64>, eps: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("at least one component is required"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("curvature eps must be positive, got {eps}")));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("centers must be finite"));
        }
        let n = centers.len();
        let mut obj = NonconvexSum {
            info: ObjectiveInfo {
                component_smoothness: Some(vec![1.0 + eps; n]),
                strong_convexity: None,
                minimizer: None,
                min_value: None,
                component_minima: Some(vec![0.0; n]),
                convex: false,
            },
            centers,
            eps,
        };
        let x_star = obj.global_minimizer();
        obj.info.min_value = Some(obj.value(&[x_star]));
        obj.info.minimizer = Some(vec![x_star]);
        Ok(obj)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn curvature(&self) -> f64 {
        self.eps
    }

    fn derivatives(&self, x: f64) -> (f64, f64) {
        let n = self.centers.len() as f64;
        let (g, h) = self.centers.iter().fold((0.0, 0.0), |(g, h), c| {
            let r = x - c;
            (g + r.sin() + self.eps * r, h + r.cos() + self.eps)
        });
        (g / n, h / n)
    }

    // f(x) >= (ε/2)·mean (x - c_i)^2 >= (ε/2)(x - c̄)^2 while f(c̄) <= 2 + (ε/2)·var(c),
    // so every global minimizer lies within sqrt(4/ε + var(c)) of c̄.
    fn global_minimizer(&self) -> f64 {
        let n = self.centers.len() as f64;
        let mean = self.centers.iter().sum::<f64>() / n;
        let var = self.centers.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
        let radius = (4.0 / self.eps + var).sqrt() + 1.0;
        let steps = ((2.0 * radius) / 1e-3).ceil() as usize;
        let h = 2.0 * radius / steps as f64;
        let mut best = (mean, self.value(&[mean]));
        for s in 0..=steps {
            let x = mean - radius + s as f64 * h;
            let v = self.value(&[x]);
            if v < best.1 {
                best = (x, v);
            }
        }
        // safeguarded Newton polish inside the bracketing grid cell
        let (lo, hi) = (best.0 - h, best.0 + h);
        let mut x = best.0;
        for _ in 0..100 {
            let (g, curv) = self.derivatives(x);
            if g.abs() < 1e-15 {
                break;
            }
            let next = if curv > 0.0 { x - g / curv } else { x };
            x = if (lo..=hi).contains(&next) { next } else { 0.5 * (x + if g > 0.0 { lo } else { hi }) };
        }
        if self.value(&[x]) <= best.1 {
            x
        } else {
            best.0
        }
    }
}

impl FiniteSumObjective for NonconvexSum {
    fn num_components(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        1
    }

    fn component_into(&self, i: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let r = x[0] - self.centers[i];
        grad[0] = r.sin() + self.eps * r;
        (1.0 - r.cos()) + 0.5 * self.eps * r * r
    }

    fn info(&self) -> &ObjectiveInfo {
        &self.info
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_each_center() {
        let obj = make_nonconvex_sum(8, 1).unwrap();
        for (i, &c) in obj.centers().iter().enumerate() {
            let e = obj.component(i, &[c]);
            assert_eq!(e.value, 0.0);
            assert_eq!(e.gradient[0], 0.0);
        }
    }

    #[test]
    fn nonnegative_on_random_points() {
        let obj = make_nonconvex_sum(5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100_000 {
            let x = rng.random_range(-50.0..50.0);
            let i = rng.random_range(0..5);
            assert!(obj.component_value(i, &[x]) >= 0.0);
        }
    }

    #[test]
    fn smoothness_on_random_pairs() {
        let obj = make_nonconvex_sum(4, 3).unwrap();
        let l = 1.0 + obj.curvature();
        assert_eq!(obj.info().smoothness(), Some(l));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let (x, y) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            let i = rng.random_range(0..4);
            let gx = obj.component(i, &[x]).gradient[0];
            let gy = obj.component(i, &[y]).gradient[0];
            assert!((gx - gy).abs() <= l * (x - y).abs() + 1e-12);
        }
    }

    #[test]
    fn is_genuinely_nonconvex() {
        let obj = NonconvexSum::new(vec![0.0], 0.1).unwrap();
        // second difference at x = π is cos(π) + ε < 0
        let h = 1e-3;
        let pi = std::f64::consts::PI;
        let f = |x: f64| obj.value(&[x]);
        assert!(f(pi + h) + f(pi - h) - 2.0 * f(pi) < 0.0);
    }

    #[test]
    fn global_minimum_beats_dense_scan() {
        let obj = make_nonconvex_sum(8, 5).unwrap();
        let f_star = obj.info().min_value.unwrap();
        let x_star = obj.info().minimizer.as_ref().unwrap()[0];
        let (g, _) = obj.derivatives(x_star);
        assert!(g.abs() < 1e-10);
        for s in 0..200_000 {
            let x = -40.0 + s as f64 * 4e-4;
            assert!(obj.value(&[x]) >= f_star - 1e-12);
        }
    }
}
