//! Constants and right-hand sides of the NGN convergence guarantees.

use crate::error::{Error, Result};
use crate::objectives::{compute_deltas, full_minimizer, FiniteSumObjective};

/// `2σL` values this close above 1 still count as the threshold.
const THRESHOLD_SLACK: f64 = 1e-12;

/// Problem constants entering the bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryContext {
    /// Smoothness, the max over components.
    pub l: f64,
    /// Strong convexity, 0 if merely convex.
    pub mu: f64,
    pub delta_int: f64,
    pub delta_pos: f64,
    pub delta_noise_sq: f64,
    pub x_star: Vec<f64>,
    pub f_star: f64,
}

impl TheoryContext {
    pub fn new(l: f64, mu: f64, delta_int: f64, delta_pos: f64) -> Result<Self> {
        let ctx = TheoryContext { l, mu, delta_int, delta_pos, delta_noise_sq: 0.0, x_star: Vec::new(), f_star: 0.0 };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn with_noise(mut self, delta_noise_sq: f64) -> Self {
        self.delta_noise_sq = delta_noise_sq;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::invalid(format!("L must be positive, got {}", self.l)));
        }
        if !(self.mu >= 0.0 && self.mu <= self.l) {
            return Err(Error::invalid(format!("mu must lie in [0, L], got {}", self.mu)));
        }
        for (name, v) in [
            ("delta_int", self.delta_int),
            ("delta_pos", self.delta_pos),
            ("delta_noise_sq", self.delta_noise_sq),
            ("f_star", self.f_star),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Builds the context from objective metadata, solving for `x^*`, the
    /// component minima and the gaps where metadata is missing.
    /// `Δ²_noise` is left at zero.
    pub fn from_objective<O: FiniteSumObjective + ?Sized>(obj: &O) -> Result<Self> {
        let info = obj.info();
        let l = info.smoothness().ok_or_else(|| Error::Precondition("objective has no smoothness constant".into()))?;
        let x_star = full_minimizer(obj)?;
        let f_star = obj.value(&x_star).max(0.0);
        let deltas = compute_deltas(obj)?;
        let ctx = TheoryContext {
            l,
            mu: info.strong_convexity.unwrap_or(0.0).min(l),
            delta_int: deltas.interpolation,
            delta_pos: deltas.position,
            delta_noise_sq: 0.0,
            x_star,
            f_star,
        };
        ctx.validate()?;
        Ok(ctx)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// `max{0, 2σL - 1}` with the threshold snapped to zero.
fn excess(sigma: f64, l: f64) -> f64 {
    let t = 2.0 * sigma * l - 1.0;
    if t <= THRESHOLD_SLACK { 0.0 } else { t }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTerms {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
}

pub fn rate_terms(sigma: f64, l: f64) -> RateTerms {
    let sl = sigma * l;
    RateTerms {
        t0: 2.0 * sigma / ((1.0 + 2.0 * sl) * (1.0 + sl)),
        t1: 6.0 * l * sigma * sigma / (1.0 + 2.0 * sl),
        t2: 2.0 * sigma * sl / (1.0 + sl) * (excess(sigma, l) / (2.0 * sl + 1.0)),
    }
}

/// `η_σ = 2σ / (1 + 2σL)²`.
pub fn eta_sigma(sigma: f64, l: f64) -> f64 {
    2.0 * sigma / (1.0 + 2.0 * sigma * l).powi(2)
}

/// `ρ = σ / ((1 + 2σL)(1 + σL))`.
pub fn rho(sigma: f64, l: f64) -> f64 {
    sigma / ((1.0 + 2.0 * sigma * l) * (1.0 + sigma * l))
}

fn convex_floor(ctx: &TheoryContext, sigma: f64) -> f64 {
    let sl = sigma * ctx.l;
    3.0 * sl * (1.0 + sl) * ctx.delta_int + sl * excess(sigma, ctx.l) * ctx.delta_pos
}

/// Bound on `E[f(x̄^K) - f^*]` for fixed `σ` on convex problems, with the
/// stated constant `η_σ`.
pub fn convex_bound(ctx: &TheoryContext, sigma: f64, k: u64, dist0_sq: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    Ok(dist0_sq / (eta_sigma(sigma, ctx.l) * k as f64) + convex_floor(ctx, sigma))
}

/// Same bound with the tighter leading constant `1/T0`.
pub fn convex_bound_proof_constant(ctx: &TheoryContext, sigma: f64, k: u64, dist0_sq: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    Ok(dist0_sq / (rate_terms(sigma, ctx.l).t0 * k as f64) + convex_floor(ctx, sigma))
}

/// Bound on `E‖x^k - x^*‖²` for fixed `σ` on strongly convex problems.
pub fn strongly_convex_bound(ctx: &TheoryContext, sigma: f64, k: u64, dist0_sq: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    if !(ctx.mu > 0.0) {
        return Err(Error::Precondition("bound requires strong convexity (mu > 0)".into()));
    }
    let contraction = strong_contraction(ctx, sigma)?;
    let sl = sigma * ctx.l;
    let geometric = contraction.powf(k as f64) * dist0_sq;
    Ok(geometric
        + 6.0 * ctx.l / ctx.mu * sigma * (1.0 + sl) * ctx.delta_int
        + 2.0 * sl / ctx.mu * excess(sigma, ctx.l) * ctx.delta_pos)
}

/// `1 - μρ`, checked to lie in `[0, 1)`.
pub fn strong_contraction(ctx: &TheoryContext, sigma: f64) -> Result<f64> {
    let mr = ctx.mu * rho(sigma, ctx.l);
    if !(mr > 0.0 && mr < 1.0) {
        return Err(Error::Precondition(format!("mu * rho = {mr} is outside (0, 1)")));
    }
    Ok(1.0 - mr)
}

/// Bound on `(1/K) Σ E‖∇f(x^k)‖²` for `σ ≤ 1/(2L)`.
pub fn nonconvex_bound(ctx: &TheoryContext, sigma: f64, k: u64, f0_gap: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    if excess(sigma, ctx.l) > 0.0 {
        return Err(Error::Precondition(format!(
            "theorem precondition violated: sigma = {sigma} exceeds 1/(2L) = {}",
            0.5 / ctx.l
        )));
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    Ok(12.0 * f0_gap / (sigma * k as f64) + 18.0 * sigma * ctx.l * ctx.delta_noise_sq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealedConstants {
    pub c1: f64,
    pub c2: f64,
}

pub fn annealed_constants(ctx: &TheoryContext, sigma0: f64) -> AnnealedConstants {
    let sl = sigma0 * ctx.l;
    AnnealedConstants {
        c1: (1.0 + 2.0 * sl) * (1.0 + sl) / (4.0 * sigma0),
        c2: (6.0 * ctx.delta_int + 2.0 * excess(sigma0, ctx.l) * ctx.delta_pos) * ctx.l * sigma0 * sigma0,
    }
}

/// Bound on the σ-weighted average suboptimality under `σ_k = σ0/√(k+1)`.
pub fn annealed_bound(ctx: &TheoryContext, sigma0: f64, k: u64, dist0_sq: f64) -> Result<f64> {
    check_positive("sigma0", sigma0)?;
    if k < 2 {
        return Err(Error::invalid(format!("K must be at least 2, got {k}")));
    }
    let AnnealedConstants { c1, c2 } = annealed_constants(ctx, sigma0);
    let denom = (k as f64).sqrt() - 1.0;
    Ok(c1 * dist0_sq / denom + c1 * c2 * ((k + 1) as f64).ln() / denom)
}

/// `(1/N) Σ_i ‖∇f(x) - ∇f_i(x)‖²`.
pub fn gradient_variance<O: FiniteSumObjective + ?Sized>(obj: &O, x: &[f64]) -> f64 {
    let full = obj.full(x).gradient;
    let mut g = vec![0.0; x.len()];
    let n = obj.num_components();
    (0..n)
        .map(|i| {
            obj.component_into(i, x, &mut g);
            crate::linalg::dist_sq(&full, &g)
        })
        .sum::<f64>()
        / n as f64
}

/// Largest exact gradient variance over the given points. A lower bound on
/// the supremum; callers add their own margin.
pub fn estimate_delta_noise_sq<O: FiniteSumObjective + ?Sized>(obj: &O, points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::NoSamples);
    }
    Ok(points.iter().map(|x| gradient_variance(obj, x)).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ctx(l: f64, mu: f64, di: f64, dp: f64) -> TheoryContext {
        TheoryContext::new(l, mu, di, dp).unwrap()
    }

    #[test]
    fn unit_rate_terms() {
        let t = rate_terms(1.0, 1.0);
        assert_relative_eq!(t.t0, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(t.t1, 2.0, max_relative = 1e-15);
        assert_relative_eq!(t.t2, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(rho(1.0, 1.0), 1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(strong_contraction(&ctx(1.0, 1.0, 0.0, 0.0), 1.0).unwrap(), 5.0 / 6.0);
        assert_relative_eq!(annealed_constants(&ctx(1.0, 0.0, 0.0, 0.0), 1.0).c1, 1.5);
    }

    #[test]
    fn threshold_clamps_t2() {
        for l in [0.1, 1.0, 7.3] {
            assert_eq!(rate_terms(0.5 / l, l).t2, 0.0);
            assert!(rate_terms(0.6 / l, l).t2 > 0.0);
        }
    }

    #[test]
    fn convex_interpolation_at_threshold() {
        let l = 2.0;
        let rhs = convex_bound(&ctx(l, 0.0, 0.0, 0.0), 0.5 / l, 10, 3.0).unwrap();
        assert_relative_eq!(rhs, 4.0 * l * 3.0 / 10.0, max_relative = 1e-14);
        let proof = convex_bound_proof_constant(&ctx(l, 0.0, 0.0, 0.0), 0.5 / l, 10, 3.0).unwrap();
        assert!(proof <= rhs);
    }

    #[test]
    fn strongly_convex_needs_mu() {
        assert!(strongly_convex_bound(&ctx(1.0, 0.0, 0.0, 0.0), 1.0, 1, 1.0).is_err());
        let c = ctx(1.0, 1.0, 0.0, 0.0);
        assert_relative_eq!(strongly_convex_bound(&c, 1.0, 2, 1.0).unwrap(), 25.0 / 36.0);
        assert_eq!(strongly_convex_bound(&c, 1.0, 0, 4.0).unwrap(), 4.0);
    }

    #[test]
    fn nonconvex_precondition() {
        let c = ctx(2.0, 0.0, 0.0, 0.0);
        assert!(matches!(nonconvex_bound(&c, 0.3, 10, 1.0), Err(Error::Precondition(_))));
        assert_relative_eq!(nonconvex_bound(&c, 0.25, 10, 1.0).unwrap(), 24.0 * 2.0 / 10.0);
    }

    #[test]
    fn annealed_requires_two_steps() {
        let c = ctx(1.0, 0.0, 0.5, 0.0);
        assert!(annealed_bound(&c, 1.0, 1, 1.0).is_err());
        assert!(annealed_bound(&c, 1.0, 2, 1.0).unwrap().is_finite());
        let a = annealed_bound(&c, 1.0, 1000, 1.0).unwrap();
        let b = annealed_bound(&c, 1.0, 100_000, 1.0).unwrap();
        assert!(b < a);
    }

    #[test]
    fn invalid_contexts() {
        assert!(TheoryContext::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(TheoryContext::new(1.0, 2.0, 0.0, 0.0).is_err());
        assert!(TheoryContext::new(1.0, 0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(gradient_variance(&make_two_quadratics(), &[0.0]), 1.0);
        assert_eq!(estimate_delta_noise_sq(&make_quadratic1d(1.0, 0.0, 0.0).unwrap(), &[vec![5.0]]).unwrap(), 0.0);
        let reg = make_linear_regression(3, 10, 1, 0.0).unwrap();
        assert!(gradient_variance(&reg, reg.planted().unwrap()) < 1e-24);
    }

    #[test]
    fn context_from_two_quadratics() {
        let c = TheoryContext::from_objective(&make_two_quadratics()).unwrap();
        assert_eq!((c.l, c.mu, c.delta_int, c.delta_pos, c.f_star), (1.0, 1.0, 0.5, 0.0, 0.5));
    }

    proptest! {
        #[test]
        fn rho_is_half_t0(sigma in 1e-4f64..1e4, l in 1e-3f64..1e3) {
            prop_assert!((rho(sigma, l) - rate_terms(sigma, l).t0 / 2.0).abs() <= 1e-15 * rho(sigma, l));
        }

        #[test]
        fn contraction_in_unit_interval(sigma in 1e-4f64..1e4, l in 1e-3f64..1e3, frac in 1e-3f64..1.0) {
            let c = TheoryContext::new(l, frac * l, 0.0, 0.0).unwrap();
            let q = strong_contraction(&c, sigma).unwrap();
            prop_assert!(q > 0.0 && q < 1.0);
        }

        #[test]
        fn bounds_decrease_in_k(sigma in 1e-3f64..10.0, k in 1u64..1_000_000, d0 in 1e-3f64..10.0) {
            let c = TheoryContext::new(1.0, 0.0, 0.3, 0.2).unwrap().with_noise(0.1);
            prop_assert!(convex_bound(&c, sigma, k + 1, d0).unwrap() < convex_bound(&c, sigma, k, d0).unwrap());
            let s = sigma.min(0.5);
            prop_assert!(nonconvex_bound(&c, s, k + 1, d0).unwrap() < nonconvex_bound(&c, s, k, d0).unwrap());
        }
    }
}
