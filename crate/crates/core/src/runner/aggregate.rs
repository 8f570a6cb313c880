use std::io::Write;

use super::trace::RunTrace;
use crate::error::Result;

/// Mean, sample standard deviation and the `2·std/√S` half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub ci_half: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let s = values.len();
    if s == 0 {
        return Summary { mean: f64::NAN, std: f64::NAN, ci_half: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / s as f64;
    let std = if s < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1) as f64).sqrt()
    };
    Summary { mean, std, ci_half: 2.0 * std / (s as f64).sqrt() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: String,
    pub summary: Summary,
}

/// Per-metric summaries across seeds. Diverged runs contribute `inf` to
/// loss-type metrics.
pub fn aggregate(traces: &[RunTrace]) -> Vec<MetricSummary> {
    let mut out = Vec::new();
    let mut push = |metric: &str, values: Vec<f64>| {
        out.push(MetricSummary { metric: metric.to_string(), summary: summarize(&values) });
    };
    let finals: Vec<Option<_>> = traces.iter().map(|t| t.final_metrics().copied()).collect();
    push("final_loss", finals.iter().map(|m| m.map_or(f64::INFINITY, |m| m.loss)).collect());
    push("final_grad_sq", finals.iter().map(|m| m.map_or(f64::INFINITY, |m| m.grad_sq)).collect());
    if finals.iter().all(|m| m.is_none_or(|m| m.dist_sq.is_some())) {
        push(
            "final_dist_sq",
            finals.iter().map(|m| m.and_then(|m| m.dist_sq).unwrap_or(f64::INFINITY)).collect(),
        );
    }
    let grad_avgs: Vec<Option<f64>> = traces
        .iter()
        .map(|t| if t.diverged() { Some(f64::INFINITY) } else { t.grad_norm_average().ok() })
        .collect();
    if grad_avgs.iter().all(Option::is_some) {
        push("grad_sq_average", grad_avgs.into_iter().flatten().collect());
    }
    push("diverged", traces.iter().map(|t| if t.diverged() { 1.0 } else { 0.0 }).collect());
    out
}

pub fn write_aggregate_csv<W: Write>(rows: &[MetricSummary], mut out: W) -> Result<()> {
    writeln!(out, "metric,mean,std,ci_half")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.metric, r.summary.mean, r.summary.std, r.summary.ci_half)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_seed() {
        assert_eq!(summarize(&[4.0]), Summary { mean: 4.0, std: 0.0, ci_half: 0.0 });
    }

    #[test]
    fn two_seeds() {
        let s = summarize(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.ci_half - 2.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_rows() {
        use crate::objectives::make_two_quadratics;
        use crate::runner::{run_seeds, RunSettings};
        let obj = make_two_quadratics();
        let settings = RunSettings::new("ngn(sigma=0.5)".parse().unwrap(), 20).with_cadence(1);
        let traces: Vec<_> = run_seeds(&obj, &settings, &[0, 1, 2]).into_iter().map(|t| t.unwrap()).collect();
        let rows = aggregate(&traces);
        let names: Vec<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
        assert_eq!(names, ["final_loss", "final_grad_sq", "final_dist_sq", "grad_sq_average", "diverged"]);
        let mut buf = Vec::new();
        write_aggregate_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("metric,mean,std,ci_half\nfinal_loss,"));
    }
}
