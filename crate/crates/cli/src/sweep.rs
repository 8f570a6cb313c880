use std::io::Write;

use ngn_core::runner::{summarize, RunTrace, Summary};

/// Role of a grid value in the sweep summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    None,
    Best,
    /// Roughly 3x below or above the best value.
    Neighbor,
}

impl Mark {
    pub fn label(self) -> &'static str {
        match self {
            Mark::None => "",
            Mark::Best => "best",
            Mark::Neighbor => "neighbor",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub final_loss: Summary,
    pub diverged: usize,
    pub runs: usize,
    pub mark: Mark,
}

impl SweepRow {
    pub fn from_traces(value: f64, traces: &[RunTrace]) -> Self {
        let losses: Vec<f64> =
            traces.iter().map(|t| t.final_metrics().map_or(f64::INFINITY, |m| m.loss)).collect();
        SweepRow {
            value,
            final_loss: summarize(&losses),
            diverged: traces.iter().filter(|t| t.diverged()).count(),
            runs: traces.len(),
            mark: Mark::None,
        }
    }
}

/// Grid neighbors count when their ratio to the best value is in this range
/// (grids step by about 3x, e.g. 0.3 / 1 / 3 / 10 / 30).
const NEIGHBOR_RATIO: (f64, f64) = (2.5, 4.0);

fn score(r: &SweepRow) -> f64 {
    if r.final_loss.mean.is_nan() { f64::INFINITY } else { r.final_loss.mean }
}

/// Marks the value with the lowest mean final loss (ties go to the smaller
/// value) and its adjacent grid values about 3x below and above. Returns the
/// index of the best row. The result does not depend on row order.
pub fn mark_grid(rows: &mut [SweepRow]) -> Option<usize> {
    let best = (0..rows.len()).min_by(|&a, &b| {
        score(&rows[a]).total_cmp(&score(&rows[b])).then(rows[a].value.total_cmp(&rows[b].value))
    })?;
    let bv = rows[best].value;
    let below = (0..rows.len()).filter(|&i| rows[i].value < bv).max_by(|&a, &b| rows[a].value.total_cmp(&rows[b].value));
    let above = (0..rows.len()).filter(|&i| rows[i].value > bv).min_by(|&a, &b| rows[a].value.total_cmp(&rows[b].value));
    for r in rows.iter_mut() {
        r.mark = Mark::None;
    }
    rows[best].mark = Mark::Best;
    for i in [below, above].into_iter().flatten() {
        let ratio = (rows[i].value / bv).max(bv / rows[i].value);
        if ratio >= NEIGHBOR_RATIO.0 && ratio <= NEIGHBOR_RATIO.1 {
            rows[i].mark = Mark::Neighbor;
        }
    }
    Some(best)
}

pub fn write_sweep_csv<W: Write>(param: &str, rows: &[SweepRow], mut out: W) -> ngn_core::Result<()> {
    writeln!(out, "param,value,final_loss_mean,final_loss_std,final_loss_ci_half,diverged,runs,mark")?;
    for r in rows {
        writeln!(
            out,
            "{param},{},{},{},{},{},{},{}",
            r.value,
            r.final_loss.mean,
            r.final_loss.std,
            r.final_loss.ci_half,
            r.diverged,
            r.runs,
            r.mark.label()
        )?;
    }
    out.flush()?;
    Ok(())
}
