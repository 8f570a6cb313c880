use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use ngn_core::config::{load_config, ConfigFile};
use ngn_core::objectives::FiniteSumObjective;
use ngn_core::runner::{aggregate, run_sgd, write_aggregate_csv, write_trace_csv, RunSettings, RunTrace, SamplerMode};
use ngn_core::verify::{self, Suite, VerifyContext};
use rayon::prelude::*;

use crate::sweep::{mark_grid, write_sweep_csv, SweepRow};
use crate::{Failure, Options};

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn run_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Run(e.into())
}

fn load(opts: &Options) -> Result<ConfigFile, Failure> {
    let path = opts.config.as_ref().ok_or_else(|| config_error(anyhow!("--config is required")))?;
    let mut cfg = load_config(path).map_err(config_error)?;
    for s in cfg.experiment.seeds.iter_mut() {
        *s = s.checked_add(opts.seed_offset).ok_or_else(|| config_error(anyhow!("seed offset overflows")))?;
    }
    Ok(cfg)
}

fn output_dir(opts: &Options, cfg: &ConfigFile) -> PathBuf {
    opts.out.clone().or_else(|| cfg.experiment.output.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(run_error)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).with_context(|| format!("creating {}", path.display())).map_err(run_error)
}

fn build(cfg: &ConfigFile) -> Result<Box<dyn FiniteSumObjective>, Failure> {
    let obj = cfg.experiment.problem.build().map_err(config_error)?;
    check_fits(&*obj, &cfg.experiment.settings)?;
    Ok(obj)
}

/// Checks that depend on the built problem.
fn check_fits(obj: &dyn FiniteSumObjective, s: &RunSettings) -> Result<(), Failure> {
    let n = obj.num_components();
    if s.sampler != SamplerMode::FullBatch && s.batch_size > n {
        return Err(config_error(anyhow!("batch_size {} exceeds the {n} components", s.batch_size)));
    }
    if let Some(x0) = &s.x0 {
        if x0.len() != 1 && x0.len() != obj.dim() {
            return Err(config_error(anyhow!("x0 has {} entries but the problem has dimension {}", x0.len(), obj.dim())));
        }
    }
    Ok(())
}

fn run_seeds(obj: &dyn FiniteSumObjective, settings: &RunSettings, seeds: &[u64]) -> Result<Vec<RunTrace>, Failure> {
    seeds
        .par_iter()
        .map(|&seed| run_sgd(obj, settings, seed).with_context(|| format!("seed {seed}")))
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(run_error)
}

pub fn run(opts: &Options) -> Result<(), Failure> {
    let cfg = load(opts)?;
    if cfg.sweep.is_some() {
        return Err(config_error(anyhow!("this file defines a sweep; use `ngn sweep`")));
    }
    let obj = build(&cfg)?;
    let exp = &cfg.experiment;
    let traces = run_seeds(&*obj, &exp.settings, &exp.seeds)?;
    let dir = output_dir(opts, &cfg);
    create_dir(&dir)?;
    for t in &traces {
        let path = dir.join(format!("trace_seed{}.csv", t.seed()));
        write_trace_csv(t, create(&path)?).map_err(run_error)?;
        if let Some(k) = t.diverged_at() {
            eprintln!("warning: seed {} diverged at step {k}", t.seed());
        }
    }
    let rows = aggregate(&traces);
    write_aggregate_csv(&rows, create(&dir.join("aggregate.csv"))?).map_err(run_error)?;
    for r in &rows {
        println!("{:<16} mean {:.6e}  std {:.3e}  ci ±{:.3e}", r.metric, r.summary.mean, r.summary.std, r.summary.ci_half);
    }
    println!("wrote {} trace file(s) and aggregate.csv to {}", traces.len(), dir.display());
    Ok(())
}

pub fn sweep(opts: &Options) -> Result<(), Failure> {
    let cfg = load(opts)?;
    let axis = cfg.sweep.clone().ok_or_else(|| config_error(anyhow!("sweep needs `sweep_param` and `sweep_values`")))?;
    let obj = build(&cfg)?;
    let exp = &cfg.experiment;
    let policies = axis.policies(&exp.settings.policy).map_err(config_error)?;
    let jobs: Vec<(usize, u64)> =
        (0..policies.len()).flat_map(|v| exp.seeds.iter().map(move |&s| (v, s))).collect();
    let traces = jobs
        .par_iter()
        .map(|&(v, seed)| {
            let settings = exp.settings.clone().with_policy(policies[v].clone());
            run_sgd(&*obj, &settings, seed).with_context(|| format!("{} seed {seed}", policies[v]))
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(run_error)?;
    let per_value = traces.chunks(exp.seeds.len());
    let mut rows: Vec<SweepRow> = axis
        .values
        .iter()
        .zip(per_value)
        .map(|(&value, ts)| SweepRow::from_traces(value, ts))
        .collect();
    let best = mark_grid(&mut rows);
    let dir = output_dir(opts, &cfg);
    create_dir(&dir)?;
    write_sweep_csv(&axis.param, &rows, create(&dir.join("sweep.csv"))?).map_err(run_error)?;
    let mut summary = String::new();
    for r in &rows {
        summary.push_str(&format!(
            "{}={:<10} final loss {:.6e} ± {:.3e}  diverged {}/{}  {}\n",
            axis.param, r.value, r.final_loss.mean, r.final_loss.ci_half, r.diverged, r.runs, r.mark.label()
        ));
    }
    if let Some(b) = best {
        summary.push_str(&format!("best {}={}\n", axis.param, rows[b].value));
    }
    fs::write(dir.join("sweep_best.txt"), &summary).context("writing sweep_best.txt").map_err(run_error)?;
    print!("{summary}");
    Ok(())
}

pub fn verify(opts: &Options, suite: &str) -> Result<(), Failure> {
    let parsed: Suite = suite.parse().map_err(|e: String| config_error(anyhow!(e)))?;
    let ctx = VerifyContext { seed: opts.seed_offset, ..VerifyContext::default() };
    let reports = verify::run_suite(parsed, &ctx);
    for r in &reports {
        println!("{r}");
    }
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    create_dir(&dir)?;
    verify::write_report_csv(&reports, create(&dir.join(format!("verify_{suite}.csv")))?).map_err(run_error)?;
    verify::write_bounds_csv(&reports, create(&dir.join(format!("verify_{suite}_bounds.csv")))?).map_err(run_error)?;
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} of {} checks passed", reports.len() - failed, reports.len());
    if verify::exit_code(&reports) != 0 {
        return Err(run_error(anyhow!("{failed} check(s) failed")));
    }
    Ok(())
}
