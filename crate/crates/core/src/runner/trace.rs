use std::io::Write;

use super::averaging::RunningAverage;
use crate::error::{Error, Result};
use crate::stepsizes::StepStatus;

pub const TRACE_HEADER: &str = "step,batch_ids,loss_batch,gamma,sigma,grad_sq_norm,loss_full,dist_sq,grad_full_sq";

/// Full-objective metrics at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullMetrics {
    pub loss: f64,
    /// `‖x - x^*‖²`, when the minimizer is known.
    pub dist_sq: Option<f64>,
    pub grad_sq: f64,
}

/// One SGD step, measured at `x^k` before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: u64,
    /// Sampled component ids; empty in full-batch mode.
    pub batch: Vec<usize>,
    pub loss_batch: f64,
    pub gamma: f64,
    pub sigma: Option<f64>,
    pub grad_sq_norm: f64,
    pub status: StepStatus,
    pub full: Option<FullMetrics>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub(super) seed: u64,
    pub(super) steps: u64,
    pub(super) full_batch: bool,
    pub(super) x0: Vec<f64>,
    pub(super) final_point: Vec<f64>,
    pub(super) final_metrics: Option<FullMetrics>,
    pub(super) uniform_average: RunningAverage,
    pub(super) weighted_average: Option<RunningAverage>,
    pub(super) iterates: Option<Vec<Vec<f64>>>,
    pub(super) records: Vec<StepRecord>,
    pub(super) diverged_at: Option<u64>,
}

impl RunTrace {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// `x^K`, or the last (possibly non-finite) iterate of a diverged run.
    pub fn final_point(&self) -> &[f64] {
        &self.final_point
    }

    /// Full metrics at `x^K`; absent for diverged runs.
    pub fn final_metrics(&self) -> Option<&FullMetrics> {
        self.final_metrics.as_ref()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn diverged_at(&self) -> Option<u64> {
        self.diverged_at
    }

    /// Stored `x^0, ..., x^{K-1}` when the run kept iterates.
    pub fn iterates(&self) -> Option<&[Vec<f64>]> {
        self.iterates.as_deref()
    }

    fn ensure_valid(&self) -> Result<()> {
        match self.diverged_at {
            Some(k) => Err(Error::Precondition(format!("run diverged at step {k}"))),
            None => Ok(()),
        }
    }

    /// `(1/K) Σ x^k` over `k = 0..K-1`.
    pub fn averaged_iterate_uniform(&self) -> Result<&[f64]> {
        self.ensure_valid()?;
        Ok(self.uniform_average.mean())
    }

    /// `Σ p_k x^k` with `p_k = σ_k / Σ σ_j`.
    pub fn averaged_iterate_weighted(&self) -> Result<&[f64]> {
        self.ensure_valid()?;
        match &self.weighted_average {
            Some(avg) if avg.total_weight() > 0.0 => Ok(avg.mean()),
            _ => Err(Error::Precondition("weighted averaging needs a policy that records sigma".into())),
        }
    }

    /// The weights `p_k` used by [`Self::averaged_iterate_weighted`].
    pub fn averaging_weights(&self) -> Result<Vec<f64>> {
        let sigmas = self
            .records
            .iter()
            .map(|r| r.sigma)
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Precondition("weighted averaging needs a policy that records sigma".into()))?;
        let total: f64 = sigmas.iter().sum();
        Ok(sigmas.iter().map(|s| s / total).collect())
    }

    /// `(1/K) Σ ‖∇f(x^k)‖²`; needs full metrics at every step.
    pub fn grad_norm_average(&self) -> Result<f64> {
        self.ensure_valid()?;
        let mut sum = 0.0;
        for r in &self.records {
            match &r.full {
                Some(m) => sum += m.grad_sq,
                None => return Err(Error::MissingMetric(format!("full gradient at step {}", r.k))),
            }
        }
        Ok(sum / self.records.len() as f64)
    }

    /// `(k, f(x^k))` at the steps where full metrics were taken.
    pub fn full_losses(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.records.iter().filter_map(|r| r.full.map(|m| (r.k, m.loss)))
    }

    pub fn is_full_batch(&self) -> bool {
        self.full_batch
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one CSV row per step. Off-cadence metric cells are empty.
pub fn write_trace_csv<W: Write>(trace: &RunTrace, mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    let mut ids = String::new();
    for r in &trace.records {
        ids.clear();
        if trace.full_batch {
            ids.push_str("all");
        } else {
            for (j, i) in r.batch.iter().enumerate() {
                if j > 0 {
                    ids.push(';');
                }
                ids.push_str(&i.to_string());
            }
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            ids,
            r.loss_batch,
            r.gamma,
            opt(r.sigma),
            r.grad_sq_norm,
            opt(r.full.map(|m| m.loss)),
            opt(r.full.and_then(|m| m.dist_sq)),
            opt(r.full.map(|m| m.grad_sq)),
        )?;
    }
    out.flush()?;
    Ok(())
}
