//! Stepsize policies: NGN and its baselines behind one interface.
//!
//! A policy observes `(k, f_i(x^k), ‖∇f_i(x^k)‖²)` and emits `γ_k`. The pure
//! formulas are exposed as free functions so they can be checked directly;
//! [`Policy`] adds parameter validation and the AdaGrad-norm accumulator.
//!
//! Policy specifications use a small call syntax:
//! `ngn(sigma=3.0)`, `ngn_annealed(sigma0=1.0, schedule=inv_sqrt)`,
//! `sps_max(c=1, gamma_b=3, fstar=0)`, `adagrad_norm(eta=10, delta0=0.01)`,
//! `constant(gamma=0.1)`, `polyak(fstar=0.0)`, `armijo()`, `aps()`,
//! `ggn(sigma=1, h=neg_log)`, `ggn(sigma=1, h=monomial, p=3)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::objectives::VALUE_FLOOR;
use crate::syntax::{CallExpr, SyntaxError};

/// What a policy sees at step `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepObservation {
    pub k: u64,
    /// `f_{i_k}(x^k)`, nonnegative.
    pub loss: f64,
    /// `‖∇f_{i_k}(x^k)‖²`.
    pub grad_sq_norm: f64,
    /// `f_{i_k}^*` when known.
    pub component_min: Option<f64>,
}

impl StepObservation {
    pub fn new(k: u64, loss: f64, grad_sq_norm: f64) -> Self {
        StepObservation { k, loss, grad_sq_norm, component_min: None }
    }

    pub fn with_component_min(mut self, m: f64) -> Self {
        self.component_min = Some(m);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Normal,
    /// The gradient is zero and the rule is undefined (APS, Polyak); the
    /// runner takes no step.
    Stationary,
    /// `f_i^* > f_i(x)` for a Polyak-type rule; the step is clamped to zero.
    NegativeGap,
}

/// A policy output. `gamma > 0` whenever `status` is `Normal`; otherwise
/// `gamma == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    pub gamma: f64,
    /// The regularization parameter used at this step, for σ-based rules.
    pub sigma: Option<f64>,
    pub status: StepStatus,
}

impl StepSize {
    fn normal(gamma: f64) -> Self {
        StepSize { gamma, sigma: None, status: StepStatus::Normal }
    }

    fn with_sigma(gamma: f64, sigma: f64) -> Self {
        StepSize { gamma, sigma: Some(sigma), status: StepStatus::Normal }
    }

    fn flagged(status: StepStatus) -> Self {
        StepSize { gamma: 0.0, sigma: None, status }
    }
}

/// `σ / (1 + σ‖∇f‖² / (2 f))` with `f` floored at [`VALUE_FLOOR`].
#[inline]
pub fn ngn_stepsize(sigma: f64, loss: f64, grad_sq_norm: f64) -> f64 {
    let loss = loss.max(VALUE_FLOOR);
    sigma / (1.0 + sigma * grad_sq_norm / (2.0 * loss))
}

/// Decreasing regularization schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `σ_k = σ_0 / sqrt(k + 1)`
    InvSqrt,
    /// `σ_k = σ_0 / (k + 1)`
    InvLinear,
}

impl Schedule {
    pub fn sigma(self, sigma0: f64, k: u64) -> f64 {
        let t = (k + 1) as f64;
        match self {
            Schedule::InvSqrt => sigma0 / t.sqrt(),
            Schedule::InvLinear => sigma0 / t,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Schedule::InvSqrt => "inv_sqrt",
            Schedule::InvLinear => "inv_linear",
        }
    }
}

/// The outer function `h` of the generalized Gauss-Newton model `f = h(c(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curvature {
    /// `h(c) = c²`, which gives NGN.
    Quadratic,
    /// `h(c) = (α/p) c^p`, `p > 1`.
    Monomial(f64),
    /// `h(y) = -log y` on a likelihood.
    NegLog,
}

impl Curvature {
    /// `q = h''/(h')²` expressed through the loss value.
    pub fn q(self, loss: f64) -> f64 {
        match self {
            Curvature::Quadratic => 1.0 / (2.0 * loss.max(VALUE_FLOOR)),
            Curvature::Monomial(p) => (p - 1.0) / (p * loss.max(VALUE_FLOOR)),
            Curvature::NegLog => 1.0,
        }
    }
}

/// `σ / (1 + σ q ‖∇f‖²)`.
#[inline]
pub fn ggn_stepsize(sigma: f64, curvature: Curvature, loss: f64, grad_sq_norm: f64) -> f64 {
    sigma / (1.0 + sigma * curvature.q(loss) * grad_sq_norm)
}

/// `f / ‖∇f‖²`, `None` when the gradient vanishes.
pub fn aps_stepsize(loss: f64, grad_sq_norm: f64) -> Option<f64> {
    (grad_sq_norm > 0.0).then(|| loss / grad_sq_norm)
}

/// `(f - f^*) / ‖∇f‖²`, `None` when the gradient vanishes. Negative gaps are
/// returned as-is.
pub fn polyak_stepsize(loss: f64, f_star: f64, grad_sq_norm: f64) -> Option<f64> {
    (grad_sq_norm > 0.0).then(|| (loss - f_star) / grad_sq_norm)
}

/// `min((f_i - f_i^*) / (c‖∇f_i‖²), γ_b)`; `γ_b` when the gradient vanishes.
/// The numerator is clamped at zero.
pub fn sps_max_stepsize(loss: f64, component_min: f64, c: f64, gamma_b: f64, grad_sq_norm: f64) -> f64 {
    if grad_sq_norm <= 0.0 {
        return gamma_b;
    }
    ((loss - component_min).max(0.0) / (c * grad_sq_norm)).min(gamma_b)
}

/// The interval `[σ/(1+σL), σ]` that contains every NGN stepsize on a
/// nonnegative `L`-smooth function.
pub fn stepsize_bounds(sigma: f64, smoothness: f64) -> (f64, f64) {
    (sigma / (1.0 + sigma * smoothness), sigma)
}

/// Scalar AdaGrad: `γ_k = η / sqrt(δ_0² + Σ_{τ≤k} ‖g_τ‖²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradNorm {
    eta: f64,
    accumulator: f64,
}

impl AdagradNorm {
    pub fn new(eta: f64, delta0: f64) -> Self {
        AdagradNorm { eta, accumulator: delta0 * delta0 }
    }

    /// Adds the current squared gradient norm, then emits the stepsize.
    pub fn next(&mut self, grad_sq_norm: f64) -> f64 {
        self.accumulator += grad_sq_norm;
        self.eta / self.accumulator.sqrt()
    }

    pub fn accumulator(&self) -> f64 {
        self.accumulator
    }
}

/// Backtracking line search for the sufficient-decrease condition
/// `f(x - γ∇f) <= f(x) - c1 γ ‖∇f‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoParams {
    pub c1: f64,
    pub backtrack: f64,
    pub gamma_init: f64,
}

pub const ARMIJO_MAX_BACKTRACKS: usize = 60;

impl Default for ArmijoParams {
    fn default() -> Self {
        ArmijoParams { c1: 1e-4, backtrack: 0.5, gamma_init: 1.0 }
    }
}

impl ArmijoParams {
    /// Returns the largest `γ_init · backtrack^n` accepted. `trial(γ)` must
    /// return `f(x - γ∇f(x))`.
    pub fn search(&self, f0: f64, grad_sq_norm: f64, mut trial: impl FnMut(f64) -> f64) -> Result<f64> {
        if grad_sq_norm <= 0.0 {
            return Ok(self.gamma_init);
        }
        let mut gamma = self.gamma_init;
        for _ in 0..=ARMIJO_MAX_BACKTRACKS {
            let f = trial(gamma);
            if f <= f0 - self.c1 * gamma * grad_sq_norm {
                return Ok(gamma);
            }
            gamma *= self.backtrack;
        }
        Err(Error::LineSearchExhausted {
            backtracks: ARMIJO_MAX_BACKTRACKS,
            last_trial: gamma / self.backtrack,
        })
    }
}

/// Declarative policy description.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Ngn { sigma: f64 },
    NgnAnnealed { sigma0: f64, schedule: Schedule },
    Ggn { sigma: f64, curvature: Curvature },
    Aps,
    /// `fstar: None` uses the observation's `f_i^*`, or 0 when unknown.
    SpsMax { c: f64, gamma_b: f64, fstar: Option<f64> },
    /// Full-batch Polyak with known optimal value.
    Polyak { fstar: f64 },
    AdagradNorm { eta: f64, delta0: f64 },
    Constant { gamma: f64 },
    /// Full-batch only.
    Armijo(ArmijoParams),
}

fn positive(name: &str, v: f64) -> Result<(), SyntaxError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SyntaxError(format!("`{name}` must be positive and finite, got {v}")))
    }
}

impl PolicySpec {
    pub fn validate(&self) -> Result<(), SyntaxError> {
        match *self {
            PolicySpec::Ngn { sigma } => positive("sigma", sigma),
            PolicySpec::NgnAnnealed { sigma0, .. } => positive("sigma0", sigma0),
            PolicySpec::Ggn { sigma, curvature } => {
                positive("sigma", sigma)?;
                match curvature {
                    Curvature::Monomial(p) if !(p > 1.0 && p.is_finite()) => {
                        Err(SyntaxError(format!("monomial exponent `p` must exceed 1, got {p}")))
                    }
                    _ => Ok(()),
                }
            }
            PolicySpec::Aps => Ok(()),
            PolicySpec::SpsMax { c, gamma_b, fstar } => {
                positive("c", c)?;
                positive("gamma_b", gamma_b)?;
                match fstar {
                    Some(f) if !(f >= 0.0 && f.is_finite()) => {
                        Err(SyntaxError(format!("`fstar` must be nonnegative, got {f}")))
                    }
                    _ => Ok(()),
                }
            }
            PolicySpec::Polyak { fstar } => {
                if fstar >= 0.0 && fstar.is_finite() {
                    Ok(())
                } else {
                    Err(SyntaxError(format!("`fstar` must be nonnegative, got {fstar}")))
                }
            }
            PolicySpec::AdagradNorm { eta, delta0 } => {
                positive("eta", eta)?;
                positive("delta0", delta0)
            }
            PolicySpec::Constant { gamma } => positive("gamma", gamma),
            PolicySpec::Armijo(p) => {
                if !(p.c1 > 0.0 && p.c1 < 1.0) {
                    return Err(SyntaxError(format!("`c1` must lie in (0, 1), got {}", p.c1)));
                }
                if !(p.backtrack > 0.0 && p.backtrack < 1.0) {
                    return Err(SyntaxError(format!("`backtrack` must lie in (0, 1), got {}", p.backtrack)));
                }
                positive("gamma_init", p.gamma_init)
            }
        }
    }

    /// Whether the rule is only defined on full-batch observations.
    pub fn requires_full_batch(&self) -> bool {
        matches!(self, PolicySpec::Polyak { .. } | PolicySpec::Armijo(_))
    }

    /// Returns a copy with one named parameter replaced, e.g. `("sigma", 3.0)`.
    pub fn with_param(&self, name: &str, value: f64) -> Result<PolicySpec, SyntaxError> {
        let mut expr: CallExpr = self.to_string().parse()?;
        match expr.args.iter_mut().find(|(k, _)| k == name) {
            Some(arg) => arg.1 = value.to_string(),
            None => expr.args.push((name.to_string(), value.to_string())),
        }
        Self::from_expr(&expr)
    }

    fn from_expr(e: &CallExpr) -> Result<Self, SyntaxError> {
        let mut r = e.reader();
        let spec = match e.name.as_str() {
            "ngn" => PolicySpec::Ngn { sigma: r.f64("sigma")? },
            "ngn_annealed" => {
                let sigma0 = r.f64("sigma0")?;
                let schedule = match r.opt_str("schedule").as_deref() {
                    None | Some("inv_sqrt") => Schedule::InvSqrt,
                    Some("inv_linear") => Schedule::InvLinear,
                    Some(other) => return Err(SyntaxError(format!("unknown schedule `{other}`"))),
                };
                PolicySpec::NgnAnnealed { sigma0, schedule }
            }
            "ggn" => {
                let sigma = r.f64("sigma")?;
                let curvature = match r.opt_str("h").as_deref() {
                    None | Some("quadratic") => Curvature::Quadratic,
                    Some("neg_log") => Curvature::NegLog,
                    Some("monomial") => Curvature::Monomial(r.f64("p")?),
                    Some(other) => return Err(SyntaxError(format!("unknown curvature `{other}`"))),
                };
                PolicySpec::Ggn { sigma, curvature }
            }
            "aps" => PolicySpec::Aps,
            "sps_max" => PolicySpec::SpsMax {
                c: r.f64_or("c", 1.0)?,
                gamma_b: r.f64("gamma_b")?,
                fstar: r.opt_f64("fstar")?,
            },
            "polyak" => PolicySpec::Polyak { fstar: r.f64_or("fstar", 0.0)? },
            "adagrad_norm" => PolicySpec::AdagradNorm {
                eta: r.f64("eta")?,
                delta0: r.f64_or("delta0", 0.01)?,
            },
            "constant" => PolicySpec::Constant { gamma: r.f64("gamma")? },
            "armijo" => {
                let d = ArmijoParams::default();
                PolicySpec::Armijo(ArmijoParams {
                    c1: r.f64_or("c1", d.c1)?,
                    backtrack: r.f64_or("backtrack", d.backtrack)?,
                    gamma_init: r.f64_or("gamma_init", d.gamma_init)?,
                })
            }
            other => return Err(SyntaxError(format!("unknown policy `{other}`"))),
        };
        r.finish()?;
        spec.validate()?;
        Ok(spec)
    }
}

impl FromStr for PolicySpec {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_expr(&s.parse()?)
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Ngn { sigma } => write!(f, "ngn(sigma={sigma})"),
            PolicySpec::NgnAnnealed { sigma0, schedule } => {
                write!(f, "ngn_annealed(sigma0={sigma0}, schedule={})", schedule.name())
            }
            PolicySpec::Ggn { sigma, curvature } => match curvature {
                Curvature::Quadratic => write!(f, "ggn(sigma={sigma}, h=quadratic)"),
                Curvature::NegLog => write!(f, "ggn(sigma={sigma}, h=neg_log)"),
                Curvature::Monomial(p) => write!(f, "ggn(sigma={sigma}, h=monomial, p={p})"),
            },
            PolicySpec::Aps => f.write_str("aps()"),
            PolicySpec::SpsMax { c, gamma_b, fstar } => {
                write!(f, "sps_max(c={c}, gamma_b={gamma_b}")?;
                if let Some(fs) = fstar {
                    write!(f, ", fstar={fs}")?;
                }
                f.write_str(")")
            }
            PolicySpec::Polyak { fstar } => write!(f, "polyak(fstar={fstar})"),
            PolicySpec::AdagradNorm { eta, delta0 } => write!(f, "adagrad_norm(eta={eta}, delta0={delta0})"),
            PolicySpec::Constant { gamma } => write!(f, "constant(gamma={gamma})"),
            PolicySpec::Armijo(p) => write!(
                f,
                "armijo(c1={}, backtrack={}, gamma_init={})",
                p.c1, p.backtrack, p.gamma_init
            ),
        }
    }
}

/// An instantiated policy. Owns mutable state, so each run needs its own.
#[derive(Debug, Clone)]
pub struct Policy {
    spec: PolicySpec,
    adagrad: Option<AdagradNorm>,
}

impl Policy {
    pub fn new(spec: PolicySpec) -> Result<Self> {
        spec.validate().map_err(|e| Error::InvalidArgument(e.0))?;
        let adagrad = match spec {
            PolicySpec::AdagradNorm { eta, delta0 } => Some(AdagradNorm::new(eta, delta0)),
            _ => None,
        };
        Ok(Policy { spec, adagrad })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn needs_line_search(&self) -> bool {
        matches!(self.spec, PolicySpec::Armijo(_))
    }

    /// The regularization parameter at step `k`, for σ-based rules.
    pub fn sigma_at(&self, k: u64) -> Option<f64> {
        match self.spec {
            PolicySpec::Ngn { sigma } | PolicySpec::Ggn { sigma, .. } => Some(sigma),
            PolicySpec::NgnAnnealed { sigma0, schedule } => Some(schedule.sigma(sigma0, k)),
            _ => None,
        }
    }

    /// Emits `γ_k` for every rule except Armijo, which needs
    /// [`Policy::line_search`].
    pub fn observe(&mut self, obs: &StepObservation) -> Result<StepSize> {
        let out = match self.spec {
            PolicySpec::Ngn { sigma } => StepSize::with_sigma(ngn_stepsize(sigma, obs.loss, obs.grad_sq_norm), sigma),
            PolicySpec::NgnAnnealed { sigma0, schedule } => {
                let sigma = schedule.sigma(sigma0, obs.k);
                StepSize::with_sigma(ngn_stepsize(sigma, obs.loss, obs.grad_sq_norm), sigma)
            }
            PolicySpec::Ggn { sigma, curvature } => {
                StepSize::with_sigma(ggn_stepsize(sigma, curvature, obs.loss, obs.grad_sq_norm), sigma)
            }
            PolicySpec::Aps => match aps_stepsize(obs.loss, obs.grad_sq_norm) {
                Some(g) if g > 0.0 => StepSize::normal(g),
                _ => StepSize::flagged(StepStatus::Stationary),
            },
            PolicySpec::SpsMax { c, gamma_b, fstar } => {
                let m = fstar.or(obs.component_min).unwrap_or(0.0);
                if m > obs.loss {
                    StepSize::flagged(StepStatus::NegativeGap)
                } else {
                    let g = sps_max_stepsize(obs.loss, m, c, gamma_b, obs.grad_sq_norm);
                    if g > 0.0 {
                        StepSize::normal(g)
                    } else {
                        // f_i = f_i^* with a nonzero gradient: no decrease possible
                        StepSize::flagged(StepStatus::Stationary)
                    }
                }
            }
            PolicySpec::Polyak { fstar } => match polyak_stepsize(obs.loss, fstar, obs.grad_sq_norm) {
                None => StepSize::flagged(StepStatus::Stationary),
                Some(g) if g < 0.0 => StepSize::flagged(StepStatus::NegativeGap),
                Some(g) if g == 0.0 => StepSize::flagged(StepStatus::Stationary),
                Some(g) => StepSize::normal(g),
            },
            PolicySpec::AdagradNorm { .. } => {
                let acc = self.adagrad.as_mut().expect("adagrad state allocated");
                StepSize::normal(acc.next(obs.grad_sq_norm))
            }
            PolicySpec::Constant { gamma } => StepSize::normal(gamma),
            PolicySpec::Armijo(_) => {
                return Err(Error::invalid("armijo needs a line-search callback"));
            }
        };
        Ok(out)
    }

    /// Armijo step; `trial(γ)` evaluates the full objective at `x - γ∇f(x)`.
    pub fn line_search(&mut self, f0: f64, grad_sq_norm: f64, trial: impl FnMut(f64) -> f64) -> Result<StepSize> {
        match self.spec {
            PolicySpec::Armijo(p) => Ok(StepSize::normal(p.search(f0, grad_sq_norm, trial)?)),
            _ => Err(Error::invalid("line search requested for a non-Armijo policy")),
        }
    }
}
