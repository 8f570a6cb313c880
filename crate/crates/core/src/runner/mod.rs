//! The SGD loop `x^{k+1} = x^k - γ_k ∇f_{i_k}(x^k)` and everything recorded
//! around it.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::{FiniteSumObjective, ProblemSpec};
use crate::stepsizes::{Policy, PolicySpec, StepObservation, StepStatus};

mod aggregate;
mod averaging;
mod pca;
mod sampler;
mod trace;

pub use aggregate::{aggregate, summarize, write_aggregate_csv, MetricSummary, Summary};
pub use averaging::RunningAverage;
pub use pca::{pca_projection, Projection};
pub use sampler::{Sampler, SamplerMode};
pub use trace::{write_trace_csv, FullMetrics, RunTrace, StepRecord, TRACE_HEADER};

/// Runs whose batch loss exceeds this are flagged as diverged.
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e20;

/// Everything needed to execute one run except the problem and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub policy: PolicySpec,
    pub steps: u64,
    pub sampler: SamplerMode,
    pub batch_size: usize,
    /// Full-objective metrics are recorded every `metric_cadence` steps
    /// (0 disables them).
    pub metric_cadence: u64,
    /// Pinned starting point; otherwise drawn from the seeded generator.
    pub x0: Option<Vec<f64>>,
    pub x0_scale: f64,
    pub store_iterates: bool,
    pub divergence_threshold: f64,
}

impl RunSettings {
    pub fn new(policy: PolicySpec, steps: u64) -> Self {
        RunSettings {
            policy,
            steps,
            sampler: SamplerMode::WithReplacement,
            batch_size: 1,
            metric_cadence: 0,
            x0: None,
            x0_scale: 1.0,
            store_iterates: false,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
        }
    }

    pub fn with_sampler(mut self, mode: SamplerMode, batch_size: usize) -> Self {
        self.sampler = mode;
        self.batch_size = batch_size;
        self
    }

    pub fn with_cadence(mut self, cadence: u64) -> Self {
        self.metric_cadence = cadence;
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn with_iterates(mut self) -> Self {
        self.store_iterates = true;
        self
    }

    pub fn with_policy(mut self, policy: PolicySpec) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_steps(mut self, steps: u64) -> Self {
        self.steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate().map_err(|e| Error::InvalidArgument(e.0))?;
        if self.steps == 0 {
            return Err(Error::invalid("the step budget must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.policy.requires_full_batch() && self.sampler != SamplerMode::FullBatch {
            return Err(Error::invalid(format!("`{}` requires full-batch sampling", self.policy)));
        }
        if !(self.x0_scale >= 0.0 && self.x0_scale.is_finite()) {
            return Err(Error::invalid("x0 scale must be nonnegative"));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::invalid("divergence threshold must be positive"));
        }
        Ok(())
    }
}

/// A complete experiment: problem, run settings, seeds and output location.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub settings: RunSettings,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        Ok(())
    }
}

fn starting_point<O: FiniteSumObjective + ?Sized>(obj: &O, settings: &RunSettings, seed: u64) -> Result<Vec<f64>> {
    match &settings.x0 {
        Some(x0) if x0.len() == obj.dim() => Ok(x0.clone()),
        // a single value broadcasts to every coordinate
        Some(x0) if x0.len() == 1 => Ok(vec![x0[0]; obj.dim()]),
        Some(x0) => Err(Error::DimensionMismatch { expected: obj.dim(), got: x0.len() }),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(0);
            Ok((0..obj.dim())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    settings.x0_scale * z
                })
                .collect())
        }
    }
}

fn full_metrics<O: FiniteSumObjective + ?Sized>(obj: &O, x: &[f64], grad: &mut [f64]) -> FullMetrics {
    let loss = obj.full_into(x, grad);
    FullMetrics {
        loss,
        dist_sq: obj.info().minimizer.as_deref().map(|xs| linalg::dist_sq(x, xs)),
        grad_sq: linalg::norm_sq(grad),
    }
}

/// Executes `settings.steps` SGD steps from a seeded (or pinned) start.
///
/// The run is deterministic in `(obj, settings, seed)`. A non-finite iterate
/// or a batch loss above the divergence threshold halts the run and flags it.
pub fn run_sgd<O: FiniteSumObjective + ?Sized>(obj: &O, settings: &RunSettings, seed: u64) -> Result<RunTrace> {
    settings.validate()?;
    let n = obj.num_components();
    let d = obj.dim();
    let mut sampler = Sampler::new(settings.sampler, settings.batch_size, n, seed)?;
    let mut policy = Policy::new(settings.policy.clone())?;
    let x0 = starting_point(obj, settings, seed)?;
    if let Some((index, &value)) = x0.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    let minima = obj.info().component_minima.clone();
    let full_batch = settings.sampler == SamplerMode::FullBatch;

    let mut x = x0.clone();
    let mut grad = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut uniform = RunningAverage::new(d);
    let mut weighted = RunningAverage::new(d);
    let mut sigma_seen = true;
    let mut records = Vec::with_capacity(settings.steps.min(1 << 24) as usize);
    let mut iterates = settings.store_iterates.then(Vec::new);
    let mut diverged_at = None;

    for k in 0..settings.steps {
        let on_cadence = settings.metric_cadence > 0 && k % settings.metric_cadence == 0;
        let batch = sampler.next_batch();
        let loss = obj.batch_into(batch, &x, &mut grad);
        let g2 = linalg::norm_sq(&grad);
        let full = on_cadence.then(|| {
            if full_batch {
                FullMetrics {
                    loss,
                    dist_sq: obj.info().minimizer.as_deref().map(|xs| linalg::dist_sq(&x, xs)),
                    grad_sq: g2,
                }
            } else {
                full_metrics(obj, &x, &mut scratch)
            }
        });
        let batch_ids = if full_batch { Vec::new() } else { batch.to_vec() };

        if !(loss.is_finite() && loss <= settings.divergence_threshold && g2.is_finite()) {
            records.push(StepRecord {
                k,
                batch: batch_ids,
                loss_batch: loss,
                gamma: f64::NAN,
                sigma: policy.sigma_at(k),
                grad_sq_norm: g2,
                status: StepStatus::Normal,
                full,
            });
            diverged_at = Some(k);
            break;
        }

        let mut obs = StepObservation::new(k, loss, g2);
        if let Some(m) = &minima {
            obs.component_min = Some(batch.iter().map(|&i| m[i]).sum::<f64>() / batch.len() as f64);
        }
        let step = if policy.needs_line_search() {
            let (x_ref, g_ref) = (&x, &grad);
            policy.line_search(loss, g2, |gamma| {
                for j in 0..d {
                    scratch[j] = x_ref[j] - gamma * g_ref[j];
                }
                obj.value(&scratch)
            })
        } else {
            policy.observe(&obs)
        }
        .map_err(|e| Error::at_step(k, e))?;

        uniform.push(&x, 1.0);
        match step.sigma {
            Some(s) => weighted.push(&x, s),
            None => sigma_seen = false,
        }
        if let Some(it) = iterates.as_mut() {
            it.push(x.clone());
        }
        if step.status == StepStatus::Normal {
            linalg::axpy(-step.gamma, &grad, &mut x);
        }
        records.push(StepRecord {
            k,
            batch: batch_ids,
            loss_batch: loss,
            gamma: step.gamma,
            sigma: step.sigma,
            grad_sq_norm: g2,
            status: step.status,
            full,
        });
        if !linalg::all_finite(&x) {
            diverged_at = Some(k);
            break;
        }
    }

    let final_metrics = if diverged_at.is_none() {
        let m = full_metrics(obj, &x, &mut scratch);
        if !(m.loss.is_finite() && m.loss <= settings.divergence_threshold) {
            diverged_at = Some(settings.steps);
        }
        Some(m)
    } else {
        None
    };

    Ok(RunTrace {
        seed,
        steps: settings.steps,
        full_batch,
        x0,
        final_point: x,
        final_metrics,
        uniform_average: uniform,
        weighted_average: sigma_seen.then_some(weighted),
        iterates,
        records,
        diverged_at,
    })
}

/// Runs every seed in parallel on the current rayon pool. Results are in
/// seed order.
pub fn run_seeds<O: FiniteSumObjective + ?Sized>(
    obj: &O,
    settings: &RunSettings,
    seeds: &[u64],
) -> Vec<Result<RunTrace>> {
    seeds.par_iter().map(|&seed| run_sgd(obj, settings, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::*;

    fn policy(s: &str) -> PolicySpec {
        s.parse().unwrap()
    }

    #[test]
    fn gd_above_stability_threshold_diverges() {
        let q = make_quadratic1d(1.2, 0.0, 0.1).unwrap();
        let settings = RunSettings::new(policy("constant(gamma=2)"), 100)
            .with_sampler(SamplerMode::FullBatch, 1)
            .with_x0(vec![3.0]);
        let trace = run_sgd(&q, &settings, 0).unwrap();
        assert!(trace.diverged());
        assert!(trace.diverged_at().unwrap() < 100);
        assert!(trace.averaged_iterate_uniform().is_err());
    }

    #[test]
    fn gd_below_threshold_converges() {
        let q = make_quadratic1d(1.2, 0.0, 0.1).unwrap();
        let settings = RunSettings::new(policy("constant(gamma=1)"), 100)
            .with_sampler(SamplerMode::FullBatch, 1)
            .with_x0(vec![3.0]);
        let trace = run_sgd(&q, &settings, 0).unwrap();
        assert!(!trace.diverged());
        assert!(trace.final_point()[0].abs() < 1e-10);
    }

    #[test]
    fn ngn_huge_sigma_stays_bounded() {
        let q = make_quadratic1d(1.2, 0.0, 0.1).unwrap();
        let settings = RunSettings::new(policy("ngn(sigma=10000)"), 10_000)
            .with_sampler(SamplerMode::FullBatch, 1)
            .with_x0(vec![3.0])
            .with_iterates();
        let trace = run_sgd(&q, &settings, 0).unwrap();
        assert!(!trace.diverged());
        let sup = trace.iterates().unwrap().iter().map(|x| x[0].abs()).fold(0.0, f64::max);
        assert!(sup <= 30.0, "sup |x| = {sup}");
    }

    #[test]
    fn zero_budget_is_rejected() {
        let q = make_quadratic1d(1.0, 0.0, 0.0).unwrap();
        let settings = RunSettings::new(policy("ngn(sigma=1)"), 0);
        assert!(run_sgd(&q, &settings, 0).is_err());
    }

    #[test]
    fn single_step_at_minimizer_does_not_move() {
        let q = make_quadratic1d(1.0, 2.0, 0.0).unwrap();
        let settings = RunSettings::new(policy("ngn(sigma=1)"), 1).with_x0(vec![2.0]);
        let trace = run_sgd(&q, &settings, 0).unwrap();
        assert_eq!(trace.records().len(), 1);
        assert_eq!(trace.final_point(), &[2.0]);
    }

    #[test]
    fn full_batch_policies_need_full_batch() {
        let q = make_quadratic1d(1.0, 0.0, 0.0).unwrap();
        for p in ["armijo()", "polyak(fstar=0)"] {
            let settings = RunSettings::new(policy(p), 10);
            assert!(run_sgd(&q, &settings, 0).is_err());
            let settings = settings.with_sampler(SamplerMode::FullBatch, 1).with_x0(vec![1.0]);
            let trace = run_sgd(&q, &settings, 0).unwrap();
            assert!(trace.final_point()[0].abs() < 1.0);
        }
    }

    #[test]
    fn aps_at_zero_loss_minimizer_is_stationary() {
        let q = make_quadratic1d(1.0, 0.0, 0.0).unwrap();
        let settings = RunSettings::new(policy("aps"), 3).with_x0(vec![0.0]);
        let trace = run_sgd(&q, &settings, 0).unwrap();
        assert!(trace.records().iter().all(|r| r.status == StepStatus::Stationary && r.gamma == 0.0));
        assert_eq!(trace.final_point(), &[0.0]);
    }

    #[test]
    fn armijo_requires_full_batch() {
        let q = make_two_quadratics();
        let settings = RunSettings::new(policy("armijo()"), 5);
        assert!(matches!(run_sgd(&q, &settings, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn x0_dimension_is_checked() {
        let obj = make_linear_regression(3, 5, 0, 0.0).unwrap();
        let settings = RunSettings::new(policy("ngn(sigma=1)"), 2).with_x0(vec![1.0, 2.0]);
        assert!(matches!(run_sgd(&obj, &settings, 0), Err(Error::DimensionMismatch { .. })));
        let settings = settings.with_x0(vec![0.5]);
        assert_eq!(run_sgd(&obj, &settings, 0).unwrap().x0(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn seeds_change_start_and_sampling() {
        let obj = make_linear_regression(3, 20, 0, 0.1).unwrap();
        let settings = RunSettings::new(policy("ngn(sigma=1)"), 50);
        let a = run_sgd(&obj, &settings, 1).unwrap();
        let b = run_sgd(&obj, &settings, 2).unwrap();
        assert_ne!(a.x0(), b.x0());
        let again = run_sgd(&obj, &settings, 1).unwrap();
        assert_eq!(a.records(), again.records());
        assert_eq!(a.final_point(), again.final_point());
    }

    #[test]
    fn parallel_seeds_match_sequential() {
        let obj = make_two_quadratics();
        let settings = RunSettings::new(policy("ngn(sigma=0.5)"), 200).with_x0(vec![3.0]);
        let seeds = [3, 1, 2];
        let par = run_seeds(&obj, &settings, &seeds);
        for (seed, trace) in seeds.iter().zip(par) {
            let seq = run_sgd(&obj, &settings, *seed).unwrap();
            assert_eq!(trace.unwrap().records(), seq.records());
        }
    }
}
