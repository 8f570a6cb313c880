//! Checks binding measured runs to the lemmas and convergence bounds.
//!
//! Every check returns a [`CheckReport`] reproducible from its name,
//! parameters and seed. Theorem checks compare against right-hand sides from
//! [`crate::theory`], with constants taken from objective metadata or
//! deterministic solves.
//!
//! Expectation bounds are checked by Monte Carlo: the seed mean must not
//! exceed the bound, and at least 95% of seeds (19 of 20) must stay within
//! 1.5 times the bound.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::{
    gradient_relative_error, scaled_finite_difference_gradient, FiniteSumObjective, ProblemSpec, VALUE_FLOOR,
};
use crate::runner::{run_sgd, RunSettings, RunTrace, SamplerMode};
use crate::stepsizes::{
    aps_stepsize, ggn_stepsize, ngn_stepsize, sps_max_stepsize, stepsize_bounds, AdagradNorm, Curvature,
    PolicySpec, Schedule,
};
use crate::theory::{self, TheoryContext};

/// The NGN rule under test: `(σ, loss, ‖g‖²) -> γ`.
pub type NgnRule = fn(f64, f64, f64) -> f64;

/// Settings shared by every check.
#[derive(Debug, Clone, Copy)]
pub struct VerifyContext {
    pub ngn: NgnRule,
    /// Offset added to every seed.
    pub seed: u64,
    /// Seeds per Monte Carlo check.
    pub seeds: usize,
}

impl Default for VerifyContext {
    fn default() -> Self {
        VerifyContext { ngn: ngn_stepsize, seed: 0, seeds: 20 }
    }
}

impl VerifyContext {
    fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|s| s + self.seed).collect()
    }
}

/// One evaluated bound, e.g. a theorem right-hand side at one `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub bound_name: String,
    pub sigma: f64,
    pub k: u64,
    pub rhs: f64,
    pub measured: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub params: String,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
    pub detail: String,
    pub bounds: Vec<BoundRow>,
}

impl CheckReport {
    fn new(name: &str, params: impl Into<String>, seed: u64) -> Self {
        CheckReport {
            name: name.to_string(),
            params: params.into(),
            measured: f64::NAN,
            bound: f64::NAN,
            tolerance: 0.0,
            pass: false,
            seed,
            detail: String::new(),
            bounds: Vec::new(),
        }
    }

    /// Sets `pass = measured <= bound + tolerance`.
    fn compare(mut self, measured: f64, bound: f64, tolerance: f64) -> Self {
        self.measured = measured;
        self.bound = bound;
        self.tolerance = tolerance;
        self.pass = measured <= bound + tolerance;
        self
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    fn failed(name: &str, params: impl Into<String>, seed: u64, err: &Error) -> Self {
        CheckReport::new(name, params, seed).detail(format!("error: {err}"))
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} ({}): measured {:.6e} vs bound {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.params,
            self.measured,
            self.bound
        )?;
        if !self.detail.is_empty() {
            write!(f, "; {}", self.detail)?;
        }
        Ok(())
    }
}

/// A problem with a pinned starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub problem: ProblemSpec,
    /// Broadcast to every coordinate when it has one entry.
    pub x0: Vec<f64>,
}

impl Fixture {
    pub fn new(problem: &str, x0: f64) -> Self {
        Fixture { problem: problem.parse().expect("fixture problem parses"), x0: vec![x0] }
    }

    fn settings(&self, policy: PolicySpec, steps: u64) -> RunSettings {
        RunSettings::new(policy, steps).with_x0(self.x0.clone())
    }

    fn dist0_sq(&self, x_star: &[f64]) -> f64 {
        if self.x0.len() == 1 {
            x_star.iter().map(|x| (self.x0[0] - x).powi(2)).sum()
        } else {
            linalg::dist_sq(&self.x0, x_star)
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}; x0={:?}", self.problem, self.x0)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random `(σ, loss, ‖g‖²)` triples; every 10th has a zero gradient.
fn random_observations(seed: u64, trials: usize) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|t| {
            let sigma = log_uniform(&mut rng, 1e-3, 1e3);
            let loss = log_uniform(&mut rng, 1e-3, 1e3);
            let g2 = if t % 10 == 0 { 0.0 } else { log_uniform(&mut rng, 1e-6, 1e6) };
            (sigma, loss, g2)
        })
        .collect()
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `γ‖g‖² = 2((σ - γ)/σ) f` over random observations.
pub fn check_lemma_equality(ctx: &VerifyContext, trials: usize) -> CheckReport {
    let worst = random_observations(ctx.seed, trials)
        .into_iter()
        .map(|(sigma, loss, g2)| {
            let gamma = (ctx.ngn)(sigma, loss, g2);
            let lhs = gamma * g2;
            let rhs = 2.0 * ((sigma - gamma) / sigma) * loss;
            let err = (lhs - rhs).abs() / lhs.abs().max(1.0);
            if err.is_nan() { f64::INFINITY } else { err }
        })
        .fold(0.0, f64::max);
    CheckReport::new("lemma_equality", format!("trials={trials}"), ctx.seed).compare(worst, 0.0, 1e-10)
}

/// Recorded NGN steps must match the rule under test.
fn rule_mismatch(ctx: &VerifyContext, trace: &RunTrace) -> f64 {
    trace
        .records()
        .iter()
        .map(|r| {
            let sigma = r.sigma.unwrap_or(f64::NAN);
            let d = rel_diff((ctx.ngn)(sigma, r.loss_batch, r.grad_sq_norm), r.gamma);
            if d.is_nan() { f64::INFINITY } else { d }
        })
        .fold(0.0, f64::max)
}

fn ngn(sigma: f64) -> PolicySpec {
    PolicySpec::Ngn { sigma }
}

/// Every `γ_k` along an NGN run lies in `[σ/(1+σL), σ]`.
pub fn check_lemma_bounds(ctx: &VerifyContext, fixture: &Fixture, sigma: f64, steps: u64) -> CheckReport {
    let params = format!("{fixture}; sigma={sigma}; steps={steps}");
    let run = || -> Result<CheckReport> {
        let obj = fixture.problem.build()?;
        let l = obj.info().smoothness().ok_or_else(|| Error::Precondition("no smoothness constant".into()))?;
        let trace = run_sgd(&*obj, &fixture.settings(ngn(sigma), steps), ctx.seed)?;
        let (lo, hi) = stepsize_bounds(sigma, l);
        let worst = trace.records().iter().map(|r| (lo - r.gamma).max(r.gamma - hi).max(0.0)).fold(0.0, f64::max);
        let mismatch = rule_mismatch(ctx, &trace);
        let mut report = CheckReport::new("lemma_bounds", params.clone(), ctx.seed)
            .compare(worst, 0.0, 1e-12)
            .detail(format!("L={l}; interval=[{lo}, {hi}]; rule mismatch={mismatch:.2e}"));
        report.pass &= mismatch <= 1e-12 && !trace.diverged() && trace.records().len() as u64 == steps;
        Ok(report)
    };
    run().unwrap_or_else(|e| CheckReport::failed("lemma_bounds", params, ctx.seed, &e))
}

/// Pointwise fundamental inequality along a single-sample NGN run, with
/// `f_i^*` from metadata or deterministic solves.
pub fn check_lemma_inequality(ctx: &VerifyContext, fixture: &Fixture, sigma: f64, steps: u64) -> CheckReport {
    let params = format!("{fixture}; sigma={sigma}; steps={steps}");
    let run = || -> Result<CheckReport> {
        let obj = fixture.problem.build()?;
        let l = obj.info().smoothness().ok_or_else(|| Error::Precondition("no smoothness constant".into()))?;
        let x_star = crate::objectives::full_minimizer(&*obj)?;
        let minima = crate::objectives::component_minima(&*obj, &x_star)?;
        let trace = run_sgd(&*obj, &fixture.settings(ngn(sigma), steps), ctx.seed)?;
        let sl = sigma * l;
        let lead = 4.0 * sl / (1.0 + 2.0 * sl);
        let excess = (2.0 * sl - 1.0) / (2.0 * sl + 1.0);
        let tail = 2.0 * sigma * sl / (1.0 + sl) * if excess > 1e-12 { excess } else { 0.0 };
        let mut worst: f64 = 0.0;
        let mut tail_used = false;
        for r in trace.records() {
            let m = minima[r.batch[0]];
            let lhs = r.gamma * r.gamma * r.grad_sq_norm;
            let rhs = lead * r.gamma * (r.loss_batch - m) + tail * m;
            tail_used |= tail * m > 0.0;
            worst = worst.max((lhs - rhs) / rhs.abs().max(1.0));
        }
        let mismatch = rule_mismatch(ctx, &trace);
        let mut report = CheckReport::new("lemma_inequality", params.clone(), ctx.seed)
            .compare(worst.max(0.0), 0.0, 1e-12)
            .detail(format!("L={l}; last term {}; rule mismatch={mismatch:.2e}", if tail_used { "active" } else { "absent" }));
        report.pass &= mismatch <= 1e-12 && !trace.diverged();
        Ok(report)
    };
    run().unwrap_or_else(|e| CheckReport::failed("lemma_inequality", params, ctx.seed, &e))
}

/// Monte Carlo acceptance over per-seed measurements.
fn monte_carlo(report: CheckReport, values: &[f64], rhs: f64) -> CheckReport {
    let s = values.len();
    let mean = values.iter().sum::<f64>() / s as f64;
    let within = values.iter().filter(|v| **v <= 1.5 * rhs).count();
    let needed = (0.95 * s as f64).ceil() as usize;
    let mut report = report.compare(mean, rhs, 0.0).detail(format!("{within}/{s} seeds within 1.5x bound"));
    report.pass &= within >= needed;
    report
}

fn run_all(obj: &dyn FiniteSumObjective, settings: &RunSettings, seeds: &[u64]) -> Result<Vec<RunTrace>> {
    let traces: Vec<RunTrace> = seeds.par_iter().map(|&s| run_sgd(obj, settings, s)).collect::<Result<_>>()?;
    if let Some(t) = traces.iter().find(|t| t.diverged()) {
        return Err(Error::Precondition(format!("seed {} diverged at step {}", t.seed(), t.diverged_at().unwrap())));
    }
    Ok(traces)
}

/// `E[f(x̄^K) - f^*]` against the fixed-σ convex bound.
pub fn check_convex_rate(ctx: &VerifyContext, fixture: &Fixture, sigma: f64, k: u64) -> CheckReport {
    let params = format!("{fixture}; sigma={sigma}; K={k}; seeds={}", ctx.seeds);
    let run = || -> Result<CheckReport> {
        let obj = fixture.problem.build()?;
        let tc = TheoryContext::from_objective(&*obj)?;
        let dist0 = fixture.dist0_sq(&tc.x_star);
        let rhs = theory::convex_bound(&tc, sigma, k, dist0)?;
        let rhs_proof = theory::convex_bound_proof_constant(&tc, sigma, k, dist0)?;
        let traces = run_all(&*obj, &fixture.settings(ngn(sigma), k), &ctx.seed_list())?;
        let values = traces
            .iter()
            .map(|t| Ok(obj.value(t.averaged_iterate_uniform()?) - tc.f_star))
            .collect::<Result<Vec<f64>>>()?;
        let mut report = monte_carlo(CheckReport::new("convex_rate", params.clone(), ctx.seed), &values, rhs);
        report.bounds = vec![
            BoundRow { bound_name: "convex".into(), sigma, k, rhs, measured: report.measured, pass: report.measured <= rhs },
            BoundRow {
                bound_name: "convex_proof_constant".into(),
                sigma,
                k,
                rhs: rhs_proof,
                measured: report.measured,
                pass: report.measured <= rhs_proof,
            },
        ];
        Ok(report)
    };
    run().unwrap_or_else(|e| CheckReport::failed("convex_rate", params, ctx.seed, &e))
}

/// Deterministic run on `f(x) = (λ/2)x²`: every step contracts `‖x - x^*‖²`
/// by at least `1 - μρ`.
pub fn check_strongly_convex_contraction(ctx: &VerifyContext, lambda: f64, sigma: f64, steps: u64) -> CheckReport {
    let params = format!("quadratic1d(lambda={lambda}); sigma={sigma}; steps={steps}; x0=3");
    let run = || -> Result<CheckReport> {
        let fixture = Fixture { problem: ProblemSpec::Quadratic1d { lambda, x_star: 0.0, f_star: 0.0 }, x0: vec![3.0] };
        let obj = fixture.problem.build()?;
        let tc = TheoryContext::from_objective(&*obj)?;
        let factor = theory::strong_contraction(&tc, sigma)?;
        let settings = fixture.settings(ngn(sigma), steps).with_sampler(SamplerMode::FullBatch, 1).with_iterates();
        let trace = run_sgd(&*obj, &settings, ctx.seed)?;
        let xs = trace.iterates().unwrap_or(&[]);
        let mut dists: Vec<f64> = xs.iter().map(|x| linalg::dist_sq(x, &tc.x_star)).collect();
        dists.push(linalg::dist_sq(trace.final_point(), &tc.x_star));
        // below the loss floor the rule is no longer the exact NGN step
        let checked: Vec<f64> = dists
            .windows(2)
            .zip(trace.records())
            .filter(|(_, r)| r.loss_batch > VALUE_FLOOR)
            .map(|(w, _)| w[1] / w[0])
            .collect();
        if checked.is_empty() {
            return Err(Error::Precondition("no step above the loss floor".into()));
        }
        let worst = checked.iter().copied().fold(0.0, f64::max);
        let mut report = CheckReport::new("strongly_convex_contraction", params.clone(), ctx.seed)
            .compare(worst, factor, 1e-9)
            .detail(format!("mu={}; rho={}; steps checked={}", tc.mu, theory::rho(sigma, tc.l), checked.len()));
        report.pass &= !trace.diverged();
        Ok(report)
    };
    run().unwrap_or_else(|e| CheckReport::failed("strongly_convex_contraction", params, ctx.seed, &e))
}

/// `E‖x^k - x^*‖²` against the strongly convex bound at `K/4`, `K/2`, `K`.
pub fn check_strongly_convex_rate(ctx: &VerifyContext, fixture: &Fixture, sigma: f64, k: u64) -> CheckReport {
    let params = format!("{fixture}; sigma={sigma}; K={k}; seeds={}", ctx.seeds);
    let run = || -> Result<CheckReport> {
        let obj = fixture.problem.build()?;
        let tc = TheoryContext::from_objective(&*obj)?;
        let dist0 = fixture.dist0_sq(&tc.x_star);
        let checkpoints = [k / 4, k / 2, k];
        let settings = fixture.settings(ngn(sigma), k).with_cadence((k / 4).max(1));
        let traces = run_all(&*obj, &settings, &ctx.seed_list())?;
        let mut report = CheckReport::new("strongly_convex_rate", params.clone(), ctx.seed);
        report.pass = true;
        for &cp in &checkpoints {
            let values: Vec<f64> = traces
                .iter()
                .map(|t| {
                    if cp == k {
                        t.final_metrics().and_then(|m| m.dist_sq).unwrap_or(f64::INFINITY)
                    } else {
                        t.records().get(cp as usize).and_then(|r| r.full).and_then(|m| m.dist_sq).unwrap_or(f64::INFINITY)
                    }
                })
                .collect();
            let rhs = theory::strongly_convex_bound(&tc, sigma, cp, dist0)?;
            let sub = monte_carlo(CheckReport::new("", "", 0), &values, rhs);
            report.bounds.push(BoundRow {
                bound_name: format!("strongly_convex@{cp}"),
                sigma,
                k: cp,
                rhs,
                measured: sub.measured,
                pass: sub.pass,
            });
            report.pass &= sub.pass;
            report.measured = sub.measured;
            report.bound = rhs;
        }
        Ok(report.detail(format!("checkpoints {checkpoints:?}")))
    };
    run().unwrap_or_else(|e| CheckReport::failed("strongly_convex_rate", params, ctx.seed, &e))
}

/// Largest gradient variance over trajectory points, random perturbations
/// of them and a grid around the starting point, times `margin`.
pub fn noise_estimate(
    obj: &dyn FiniteSumObjective,
    fixture: &Fixture,
    sigma: f64,
    seeds: &[u64],
    margin: f64,
) -> Result<f64> {
    let probe_steps = 10_000;
    let settings = fixture.settings(ngn(sigma), probe_steps).with_iterates();
    let d = obj.dim();
    let mut points = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.first().copied().unwrap_or(0));
    for &s in seeds.iter().take(3) {
        let trace = run_sgd(obj, &settings, s)?;
        for x in trace.iterates().unwrap_or(&[]).iter().step_by(50) {
            let mut y = x.clone();
            for v in y.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += z;
            }
            points.push(x.clone());
            points.push(y);
        }
    }
    let x0 = if fixture.x0.len() == d { fixture.x0.clone() } else { vec![fixture.x0[0]; d] };
    let radius = 2.0 * linalg::norm_sq(&x0).sqrt().max(1.0);
    for t in 0..=400 {
        let s = -radius + 2.0 * radius * t as f64 / 400.0;
        points.push(vec![s; d]);
    }
    Ok(margin * theory::estimate_delta_noise_sq(obj, &points)?)
}

/// `(1/K) Σ ‖∇f(x^k)‖²` against the nonconvex bound with a margined noise
/// estimate.
pub fn check_nonconvex_rate(ctx: &VerifyContext, fixture: &Fixture, sigma: f64, k: u64) -> CheckReport {
    let params = format!("{fixture}; sigma={sigma}; K={k}; seeds={}", ctx.seeds);
    let run = || -> Result<CheckReport> {
        let obj = fixture.problem.build()?;
        let info = obj.info();
        let l = info.smoothness().ok_or_else(|| Error::Precondition("no smoothness constant".into()))?;
        let f_star = match info.min_value {
            Some(v) => v,
            None => obj.value(&crate::objectives::full_minimizer(&*obj)?),
        };
        let seeds = ctx.seed_list();
        let noise = noise_estimate(&*obj, fixture, sigma, &seeds, 2.0)?;
        let tc = TheoryContext::new(l, 0.0, 0.0, 0.0)?.with_noise(noise);
        let d = obj.dim();
        let x0 = if fixture.x0.len() == d { fixture.x0.clone() } else { vec![fixture.x0[0]; d] };
        let gap = obj.value(&x0) - f_star;
        let rhs = theory::nonconvex_bound(&tc, sigma, k, gap)?;
        let traces = run_all(&*obj, &fixture.settings(ngn(sigma), k).with_cadence(1), &seeds)?;
        let values = traces.iter().map(|t| t.grad_norm_average()).collect::<Result<Vec<f64>>>()?;
        let mut report = monte_carlo(CheckReport::new("nonconvex_rate", params.clone(), ctx.seed), &values, rhs);
        report.detail = format!("{}; delta_noise_sq (2x margin)={noise:.4e}; f0 gap={gap:.4e}", report.detail);
        report.bounds.push(BoundRow { bound_name: "nonconvex".into(), sigma, k, rhs, measured: report.measured, pass: report.pass });
        Ok(report)
    };
    run().unwrap_or_else(|e| CheckReport::failed("nonconvex_rate", params, ctx.seed, &e))
}

/// σ-weighted average suboptimality under `σ_k = σ0/√(k+1)` at each `K`;
/// both the bound and the measured mean must decrease along `ks`.
pub fn check_annealed_rate(ctx: &VerifyContext, fixture: &Fixture, sigma0: f64, ks: &[u64]) -> CheckReport {
    let params = format!("{fixture}; sigma0={sigma0}; K={ks:?}; seeds={}", ctx.seeds);
    let run = || -> Result<CheckReport> {
        let obj = fixture.problem.build()?;
        let tc = TheoryContext::from_objective(&*obj)?;
        let dist0 = fixture.dist0_sq(&tc.x_star);
        let policy = PolicySpec::NgnAnnealed { sigma0, schedule: Schedule::InvSqrt };
        let mut report = CheckReport::new("annealed_rate", params.clone(), ctx.seed);
        report.pass = true;
        let mut prev: Option<(f64, f64)> = None;
        let mut monotone = true;
        for &k in ks {
            let rhs = theory::annealed_bound(&tc, sigma0, k, dist0)?;
            let traces = run_all(&*obj, &fixture.settings(policy.clone(), k), &ctx.seed_list())?;
            let values = traces
                .iter()
                .map(|t| Ok(obj.value(t.averaged_iterate_weighted()?) - tc.f_star))
                .collect::<Result<Vec<f64>>>()?;
            let sub = monte_carlo(CheckReport::new("", "", 0), &values, rhs);
            report.bounds.push(BoundRow {
                bound_name: "annealed".into(),
                sigma: sigma0,
                k,
                rhs,
                measured: sub.measured,
                pass: sub.pass,
            });
            if let Some((r, m)) = prev {
                monotone &= rhs < r && sub.measured < m;
            }
            prev = Some((rhs, sub.measured));
            report.pass &= sub.pass;
            report.measured = sub.measured;
            report.bound = rhs;
        }
        report.pass &= monotone;
        Ok(report.detail(format!("decreasing across K: {monotone}")))
    };
    run().unwrap_or_else(|e| CheckReport::failed("annealed_rate", params, ctx.seed, &e))
}

pub const STABILITY_SIGMAS: [f64; 5] = [0.1, 1.0, 10.0, 100.0, 1e4];

/// Horizon for the σ = 100 stepsize limit. The iterates first settle into a
/// slowly shrinking two-cycle; after 500 steps the stepsize still alternates
/// between about 1.09 and 3.52, and it is flat to 1e-5 after 20,000.
const LIMIT_STEPS: u64 = 20_000;

/// NGN stays bounded on `quadratic1d(λ=1.2, f^*=0.1)` from `x^0 = 3` for
/// every σ, GD with `γ = 2 > 2/λ` diverges within 100 steps, GD with
/// `γ = 1` does not, and the NGN stepsize at σ = 100 settles within 5% of
/// a value no larger than `2/λ` over its last 100 steps.
pub fn check_never_diverge(ctx: &VerifyContext) -> CheckReport {
    let lambda = 1.2;
    let params = format!("quadratic1d(lambda={lambda}, f_star=0.1); x0=3; sigmas={STABILITY_SIGMAS:?}");
    let run = || -> Result<CheckReport> {
        let fixture = Fixture { problem: ProblemSpec::Quadratic1d { lambda, x_star: 0.0, f_star: 0.1 }, x0: vec![3.0] };
        let obj = fixture.problem.build()?;
        let full = |policy: PolicySpec, steps: u64| {
            fixture.settings(policy, steps).with_sampler(SamplerMode::FullBatch, 1).with_iterates()
        };
        let envelope = 10.0 * 3.0;
        let mut notes = Vec::new();
        let mut pass = true;
        let mut worst_sup: f64 = 0.0;
        for sigma in STABILITY_SIGMAS {
            let steps = if sigma >= 1e4 { 10_000 } else { 1_000 };
            let trace = run_sgd(&*obj, &full(ngn(sigma), steps), ctx.seed)?;
            let sup = trace.iterates().unwrap_or(&[]).iter().map(|x| x[0].abs()).fold(trace.final_point()[0].abs(), f64::max);
            worst_sup = worst_sup.max(sup);
            pass &= !trace.diverged() && sup <= envelope;
            notes.push(format!("sigma={sigma}: sup|x|={sup:.4}"));
        }
        let gd = run_sgd(&*obj, &full(PolicySpec::Constant { gamma: 2.0 }, 100), ctx.seed)?;
        pass &= gd.diverged_at().is_some_and(|k| k < 100);
        notes.push(format!("gd(2) diverged at {:?}", gd.diverged_at()));
        let gd1 = run_sgd(&*obj, &full(PolicySpec::Constant { gamma: 1.0 }, 100), ctx.seed)?;
        pass &= !gd1.diverged();

        let trace = run_sgd(&*obj, &full(ngn(100.0), LIMIT_STEPS), ctx.seed)?;
        let tail: Vec<f64> = trace.records()[(LIMIT_STEPS - 100) as usize..].iter().map(|r| r.gamma).collect();
        let limit = tail.iter().sum::<f64>() / tail.len() as f64;
        let spread = tail.iter().map(|g| rel_diff(*g, limit)).fold(0.0, f64::max);
        let threshold = 2.0 / lambda;
        pass &= spread <= 0.05 && limit <= threshold * (1.0 + 1e-9);
        notes.push(format!("sigma=100 tail stepsize {limit:.6} (max deviation {:.2}%)", 100.0 * spread));

        let mut report = CheckReport::new("never_diverge", params.clone(), ctx.seed).compare(worst_sup, envelope, 0.0);
        report.pass &= pass;
        report.bounds.push(BoundRow {
            bound_name: "stepsize_limit".into(),
            sigma: 100.0,
            k: LIMIT_STEPS,
            rhs: threshold,
            measured: limit,
            pass: limit <= threshold * (1.0 + 1e-9),
        });
        Ok(report.detail(notes.join("; ")))
    };
    run().unwrap_or_else(|e| CheckReport::failed("never_diverge", params, ctx.seed, &e))
}

/// A long large-σ NGN run on a synthetic classification problem keeps every
/// metric finite.
pub fn check_large_sigma_stability(ctx: &VerifyContext, problem: &str, sigma: f64, steps: u64) -> CheckReport {
    let params = format!("{problem}; sigma={sigma}; steps={steps}");
    let run = || -> Result<CheckReport> {
        let obj = problem.parse::<ProblemSpec>().map_err(|e| Error::invalid(e.0))?.build()?;
        let settings = RunSettings::new(ngn(sigma), steps).with_cadence(100);
        let trace = run_sgd(&*obj, &settings, ctx.seed)?;
        let finite = trace.records().iter().all(|r| {
            r.loss_batch.is_finite()
                && r.gamma.is_finite()
                && r.grad_sq_norm.is_finite()
                && r.full.is_none_or(|m| m.loss.is_finite() && m.grad_sq.is_finite())
        }) && linalg::all_finite(trace.final_point());
        let worst = trace.full_losses().map(|(_, l)| l).fold(0.0, f64::max);
        let first = trace.full_losses().next().map_or(f64::NAN, |(_, l)| l);
        let final_loss = trace.final_metrics().map_or(f64::INFINITY, |m| m.loss);
        let mut report = CheckReport::new("large_sigma_stability", params.clone(), ctx.seed)
            .compare(if finite { 0.0 } else { 1.0 }, 0.0, 0.0)
            .detail(format!("initial loss {first:.4}; max loss {worst:.4}; final loss {final_loss:.4}"));
        report.measured = final_loss;
        report.bound = f64::INFINITY;
        report.pass &= !trace.diverged() && trace.records().len() as u64 == steps;
        Ok(report)
    };
    run().unwrap_or_else(|e| CheckReport::failed("large_sigma_stability", params, ctx.seed, &e))
}

pub const GRADIENT_FAMILIES: [&str; 6] = [
    "quadratic1d(lambda=1.2, x_star=0.5, f_star=0.1)",
    "two_quadratics",
    "linear_regression(d=5, n=20, seed=1, noise=0.3)",
    "logistic(n=40, d=4, classes=3, seed=2, l2=0.01)",
    "logistic(n=40, d=3, classes=2, seed=5, l2=0)",
    "nonconvex(n=8, seed=3)",
];

/// Analytic gradients against central differences at random points and
/// components, plus a random mini-batch per point.
pub fn check_gradients(ctx: &VerifyContext, points: usize) -> CheckReport {
    let params = format!("families={}; points={points}", GRADIENT_FAMILIES.len());
    let run = || -> Result<CheckReport> {
        let mut worst: f64 = 0.0;
        let mut per_family = Vec::new();
        for (fi, family) in GRADIENT_FAMILIES.iter().enumerate() {
            let obj = family.parse::<ProblemSpec>().map_err(|e| Error::invalid(e.0))?.build()?;
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(fi as u64));
            let mut family_worst: f64 = 0.0;
            let d = obj.dim();
            let mut grad = vec![0.0; d];
            for _ in 0..points {
                let x: Vec<f64> = (0..d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        2.0 * z
                    })
                    .collect();
                let i = rng.random_range(0..obj.num_components());
                let analytic = obj.component(i, &x).gradient;
                let numeric = scaled_finite_difference_gradient(&*obj, i, &x, 1e-5);
                family_worst = family_worst.max(gradient_relative_error(&analytic, &numeric));

                let size = rng.random_range(1..=obj.num_components());
                let batch: Vec<usize> = (0..size).map(|_| rng.random_range(0..obj.num_components())).collect();
                obj.batch_into(&batch, &x, &mut grad);
                let mut oracle = vec![0.0; d];
                for &b in &batch {
                    let g = scaled_finite_difference_gradient(&*obj, b, &x, 1e-5);
                    linalg::axpy(1.0 / size as f64, &g, &mut oracle);
                }
                family_worst = family_worst.max(gradient_relative_error(&grad, &oracle));
            }
            if family_worst.is_nan() {
                family_worst = f64::INFINITY;
            }
            worst = worst.max(family_worst);
            per_family.push(format!("{}: {family_worst:.2e}", family.split('(').next().unwrap_or(family)));
        }
        Ok(CheckReport::new("gradients", params.clone(), ctx.seed).compare(worst, 1e-5, 0.0).detail(per_family.join("; ")))
    };
    run().unwrap_or_else(|e| CheckReport::failed("gradients", params, ctx.seed, &e))
}

/// `ggn(monomial p=2) ≡ ggn(quadratic) ≡ ngn` and the negative-log form
/// `σ/(1 + σ‖g‖²)`.
pub fn check_ggn_reductions(ctx: &VerifyContext, trials: usize) -> CheckReport {
    let mut worst: f64 = 0.0;
    for (sigma, loss, g2) in random_observations(ctx.seed.wrapping_add(1), trials) {
        let reference = (ctx.ngn)(sigma, loss, g2);
        let mono = ggn_stepsize(sigma, Curvature::Monomial(2.0), loss, g2);
        let quad = ggn_stepsize(sigma, Curvature::Quadratic, loss, g2);
        let neglog = ggn_stepsize(sigma, Curvature::NegLog, loss, g2);
        let hand = sigma / (1.0 + sigma * g2);
        for d in [rel_diff(mono, reference), rel_diff(quad, reference), rel_diff(neglog, hand)] {
            worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    CheckReport::new("ggn_reductions", format!("trials={trials}"), ctx.seed).compare(worst, 0.0, 1e-12)
}

/// AdaGrad-norm monotonicity, the SPS_max cap and the harmonic-mean form of
/// NGN.
pub fn check_baselines(ctx: &VerifyContext, trials: usize) -> CheckReport {
    let obs = random_observations(ctx.seed.wrapping_add(2), trials);
    let mut adagrad = AdagradNorm::new(1.0, 0.01);
    let mut prev = f64::INFINITY;
    let mut adagrad_violations = 0;
    let mut cap_violations = 0;
    let mut harmonic: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(3));
    for &(sigma, loss, g2) in &obs {
        let g = adagrad.next(g2);
        if !(g <= prev) {
            adagrad_violations += 1;
        }
        prev = g;
        let gamma_b = log_uniform(&mut rng, 1e-3, 1e3);
        let fmin = loss * rng.random_range(0.0..1.0);
        if !(sps_max_stepsize(loss, fmin, 1.0, gamma_b, g2) <= gamma_b) {
            cap_violations += 1;
        }
        if g2 > 0.0 {
            let aps = aps_stepsize(loss, g2).unwrap_or(f64::NAN);
            let hm = 2.0 / (2.0 / sigma + 1.0 / aps);
            let d = rel_diff((ctx.ngn)(sigma, loss, g2), hm);
            harmonic = harmonic.max(if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    let mut report = CheckReport::new("baselines", format!("trials={trials}"), ctx.seed)
        .compare(harmonic, 0.0, 1e-12)
        .detail(format!("adagrad increases={adagrad_violations}; sps cap violations={cap_violations}"));
    report.pass &= adagrad_violations == 0 && cap_violations == 0;
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemmas,
    Theorems,
    Stability,
    Gradients,
    Stepsizes,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["lemmas", "theorems", "stability", "gradients", "stepsizes", "all"];
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "lemmas" => Suite::Lemmas,
            "theorems" => Suite::Theorems,
            "stability" => Suite::Stability,
            "gradients" => Suite::Gradients,
            "stepsizes" => Suite::Stepsizes,
            "all" => Suite::All,
            other => return Err(format!("unknown suite `{other}` (expected one of {})", Suite::NAMES.join(", "))),
        })
    }
}

type Check = Box<dyn Fn(&VerifyContext) -> CheckReport + Send + Sync>;

/// Fixtures for the trajectory lemma checks.
pub fn lemma_fixtures() -> Vec<Fixture> {
    vec![
        Fixture::new("quadratic1d(lambda=1.2, x_star=0, f_star=0.1)", 3.0),
        Fixture::new("two_quadratics", 3.0),
        Fixture::new("linear_regression(d=4, n=30, seed=1, noise=0.5)", 1.0),
        Fixture::new("logistic(n=60, d=4, classes=3, seed=1, l2=0.01)", 0.5),
    ]
}

fn lemma_checks() -> Vec<Check> {
    let mut checks: Vec<Check> = vec![Box::new(|c| check_lemma_equality(c, 10_000))];
    checks.push(Box::new(|c| {
        merge(
            "lemma_bounds",
            lemma_fixtures()
                .iter()
                .flat_map(|f| [0.1, 1.0, 10.0, 1e3].map(|s| check_lemma_bounds(c, f, s, 1_000)))
                .collect(),
        )
    }));
    checks.push(Box::new(|c| {
        let mut reports = Vec::new();
        for f in lemma_fixtures() {
            let l = match f.problem.build().ok().and_then(|o| o.info().smoothness()) {
                Some(l) => l,
                None => return CheckReport::new("lemma_inequality", f.to_string(), c.seed).detail("no smoothness constant"),
            };
            for s in [0.1 / l, 0.5 / l, 2.0 / l] {
                reports.push(check_lemma_inequality(c, &f, s, 1_000));
            }
        }
        merge("lemma_inequality", reports)
    }));
    checks
}

/// Folds several instances of one check into a single report; the measured
/// value is the worst slack `measured - bound`.
fn merge(name: &str, reports: Vec<CheckReport>) -> CheckReport {
    let mut out = CheckReport::new(name, format!("instances={}", reports.len()), reports.first().map_or(0, |r| r.seed));
    out.pass = !reports.is_empty() && reports.iter().all(|r| r.pass);
    let worst = reports
        .iter()
        .max_by(|a, b| (a.measured - a.bound).total_cmp(&(b.measured - b.bound)))
        .cloned();
    if let Some(w) = worst {
        out.measured = w.measured;
        out.bound = w.bound;
        out.tolerance = w.tolerance;
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| format!("{} [{}]", r.params, r.detail)).collect();
    out.detail = if failed.is_empty() { "all instances pass".into() } else { format!("failing: {}", failed.join(" | ")) };
    out.bounds = reports.into_iter().flat_map(|r| r.bounds).collect();
    out
}

fn theorem_checks() -> Vec<Check> {
    vec![
        Box::new(|c| {
            let l = 1.2;
            merge(
                "strongly_convex_contraction",
                [0.1 / l, 1.0 / l, 10.0 / l].iter().map(|&s| check_strongly_convex_contraction(c, l, s, 200)).collect(),
            )
        }),
        Box::new(|c| check_strongly_convex_rate(c, &Fixture::new("two_quadratics", 3.0), 0.1, 10_000)),
        Box::new(|c| check_convex_rate(c, &Fixture::new("two_quadratics", 3.0), 0.05, 100_000)),
        Box::new(|c| {
            let fixture = Fixture::new("nonconvex(n=8, seed=0)", 3.0);
            let l = fixture.problem.build().ok().and_then(|o| o.info().smoothness()).unwrap_or(f64::NAN);
            check_nonconvex_rate(c, &fixture, 0.5 / l, 100_000)
        }),
        Box::new(|c| check_annealed_rate(c, &Fixture::new("two_quadratics", 3.0), 1.0, &[1_000, 10_000, 100_000])),
    ]
}

fn suite_checks(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Lemmas => lemma_checks(),
        Suite::Theorems => theorem_checks(),
        Suite::Stability => vec![
            Box::new(check_never_diverge),
            Box::new(|c| check_large_sigma_stability(c, "logistic(n=300, d=5, classes=3, seed=0, l2=0)", 30.0, 10_000)),
        ],
        Suite::Gradients => vec![Box::new(|c| check_gradients(c, 100))],
        Suite::Stepsizes => vec![
            Box::new(|c| check_ggn_reductions(c, 10_000)),
            Box::new(|c| check_baselines(c, 10_000)),
        ],
        Suite::All => [Suite::Lemmas, Suite::Theorems, Suite::Stability, Suite::Gradients, Suite::Stepsizes]
            .into_iter()
            .flat_map(suite_checks)
            .collect(),
    }
}

/// Runs a suite's checks concurrently; reports come back in a fixed order.
pub fn run_suite(suite: Suite, ctx: &VerifyContext) -> Vec<CheckReport> {
    suite_checks(suite).par_iter().map(|check| check(ctx)).collect()
}

pub const REPORT_HEADER: &str = "check,params,measured,bound,tolerance,pass,seed,detail";
pub const BOUND_HEADER: &str = "bound_name,sigma,K,rhs,measured,pass";

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn write_report_csv<W: Write>(reports: &[CheckReport], mut out: W) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e},{},{},{}",
            r.name,
            quote(&r.params),
            r.measured,
            r.bound,
            r.tolerance,
            r.pass,
            r.seed,
            quote(&r.detail)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_bounds_csv<W: Write>(reports: &[CheckReport], mut out: W) -> Result<()> {
    writeln!(out, "{BOUND_HEADER}")?;
    for b in reports.iter().flat_map(|r| &r.bounds) {
        writeln!(out, "{},{},{},{:e},{:e},{}", b.bound_name, b.sigma, b.k, b.rhs, b.measured, b.pass)?;
    }
    out.flush()?;
    Ok(())
}

/// 0 when every check passes, 1 otherwise.
pub fn exit_code(reports: &[CheckReport]) -> i32 {
    if reports.iter().all(|r| r.pass) { 0 } else { 1 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flipped(sigma: f64, loss: f64, g2: f64) -> f64 {
        sigma / (1.0 - sigma * g2 / (2.0 * loss.max(1e-12)))
    }

    #[test]
    fn equality_example_and_mutation() {
        let ctx = VerifyContext::default();
        assert!(check_lemma_equality(&ctx, 1000).pass);
        let bad = VerifyContext { ngn: flipped, ..ctx };
        assert!(!check_lemma_equality(&bad, 1000).pass);
        assert!(!check_ggn_reductions(&bad, 100).pass);
        assert!(!check_baselines(&bad, 100).pass);
    }

    #[test]
    fn bounds_on_quadratic() {
        let ctx = VerifyContext::default();
        let f = Fixture::new("quadratic1d(lambda=1.2, f_star=0.1)", 3.0);
        for s in [1e-6, 1.0, 100.0] {
            let r = check_lemma_bounds(&ctx, &f, s, 300);
            assert!(r.pass, "{r}");
        }
        let bad = VerifyContext { ngn: flipped, ..ctx };
        assert!(!check_lemma_bounds(&bad, &f, 1.0, 50).pass);
    }

    #[test]
    fn inequality_on_quadratic_activates_last_term() {
        let ctx = VerifyContext::default();
        let f = Fixture::new("quadratic1d(lambda=1.2, f_star=0.1)", 3.0);
        let r = check_lemma_inequality(&ctx, &f, 2.0 / 1.2, 1000);
        assert!(r.pass, "{r}");
        assert!(r.detail.contains("active"));
        let r = check_lemma_inequality(&ctx, &f, 0.5 / 1.2, 1000);
        assert!(r.pass && r.detail.contains("absent"), "{r}");
    }

    #[test]
    fn contraction_passes() {
        let r = check_strongly_convex_contraction(&VerifyContext::default(), 1.0, 1.0, 100);
        assert!(r.pass, "{r}");
    }

    #[test]
    fn failing_build_reports_failure() {
        let f = Fixture { problem: ProblemSpec::LinearRegressionFile("/nonexistent".into()), x0: vec![0.0] };
        let r = check_lemma_bounds(&VerifyContext::default(), &f, 1.0, 10);
        assert!(!r.pass && r.detail.starts_with("error"));
    }

    #[test]
    fn monte_carlo_rule() {
        let base = || CheckReport::new("x", "", 0);
        let mut v = vec![0.5; 20];
        assert!(monte_carlo(base(), &v, 1.0).pass);
        v[0] = 1.6;
        assert!(monte_carlo(base(), &v, 1.0).pass);
        v[1] = 1.6;
        assert!(!monte_carlo(base(), &v, 1.0).pass);
        assert!(!monte_carlo(base(), &[2.0; 20], 1.0).pass);
    }

    #[test]
    fn suite_names() {
        for n in Suite::NAMES {
            assert!(n.parse::<Suite>().is_ok());
        }
        assert!("".parse::<Suite>().is_err());
        assert!("lemma".parse::<Suite>().is_err());
    }

    #[test]
    fn report_csv_quotes_fields() {
        let r = CheckReport::new("a", "x=1, y=\"2\"", 0).compare(1.0, 2.0, 0.0);
        let mut buf = Vec::new();
        write_report_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "a,\"x=1, y=\"\"2\"\"\",1e0,2e0,0e0,true,0,\"\"");
        assert_eq!(exit_code(&[]), 0);
    }
}
