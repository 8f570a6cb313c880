//! Flat `key = value` experiment files.
//!
//! ```text
//! # comments start with '#'
//! problem = quadratic1d(lambda=1.2, f_star=0.1)
//! policy  = ngn(sigma=1)
//! steps   = 100
//! seeds   = 0, 1, 2        # or a half-open range: 0..20
//! sampler = uniform        # uniform | shuffle | full_batch
//! ```
//!
//! Sweep files add `sweep_param` and `sweep_values`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::objectives::ProblemSpec;
use crate::runner::{ExperimentConfig, RunSettings, SamplerMode};
use crate::stepsizes::PolicySpec;

/// A policy parameter varied over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// The policy for every grid value, in grid order.
    pub fn policies(&self, base: &PolicySpec) -> Result<Vec<PolicySpec>> {
        self.values
            .iter()
            .map(|&v| {
                base.with_param(&self.param, v)
                    .map_err(|e| Error::ConfigInvalid(format!("sweep value {v}: {}", e.0)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub sweep: Option<SweepAxis>,
}

const KEYS: &[&str] = &[
    "problem",
    "policy",
    "steps",
    "seeds",
    "sampler",
    "batch_size",
    "cadence",
    "x0",
    "x0_scale",
    "store_iterates",
    "output",
    "divergence_threshold",
    "sweep_param",
    "sweep_values",
];

fn list<T: std::str::FromStr>(text: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|item| item.trim().parse::<T>().map_err(|e| format!("`{}`: {e}", item.trim())))
        .collect()
}

fn seeds(text: &str) -> std::result::Result<Vec<u64>, String> {
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
        if b <= a {
            return Err(format!("empty seed range {a}..{b}"));
        }
        return Ok((a..b).collect());
    }
    list(text)
}

fn scalar<T: std::str::FromStr>(text: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    text.parse::<T>().map_err(|e| format!("`{text}`: {e}"))
}

/// Parses a config file. Every malformed input yields an error naming the
/// offending line.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut values: Vec<Option<(usize, String)>> = vec![None; KEYS.len()];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fail = |message: String| Error::Config { line, message };
        let (key, value) = content.split_once('=').ok_or_else(|| fail(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let slot = KEYS.iter().position(|k| *k == key).ok_or_else(|| fail(format!("unknown key `{key}`")))?;
        if values[slot].is_some() {
            return Err(fail(format!("duplicate key `{key}`")));
        }
        if value.is_empty() {
            return Err(fail(format!("empty value for `{key}`")));
        }
        values[slot] = Some((line, value.to_string()));
    }

    let get = |key: &str| values[KEYS.iter().position(|k| *k == key).unwrap()].as_ref();
    let required = |key: &str| get(key).ok_or_else(|| Error::ConfigInvalid(format!("missing required key `{key}`")));
    fn at<T>(entry: &(usize, String), f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<T> {
        f(&entry.1).map_err(|message| Error::Config { line: entry.0, message })
    }

    let problem: ProblemSpec = at(required("problem")?, |v| v.parse().map_err(|e: crate::syntax::SyntaxError| e.0))?;
    let policy: PolicySpec = at(required("policy")?, |v| v.parse().map_err(|e: crate::syntax::SyntaxError| e.0))?;
    let steps_entry = required("steps")?;
    let steps: u64 = at(steps_entry, scalar)?;
    if steps == 0 {
        return Err(Error::Config { line: steps_entry.0, message: "steps must be at least 1".into() });
    }
    let mut settings = RunSettings::new(policy, steps);
    let seed_list = match get("seeds") {
        Some(e) => at(e, seeds)?,
        None => vec![0],
    };
    if let Some(e) = get("sampler") {
        settings.sampler = at(e, |v| v.parse::<SamplerMode>())?;
    }
    if let Some(e) = get("batch_size") {
        settings.batch_size = at(e, scalar)?;
        if settings.batch_size == 0 {
            return Err(Error::Config { line: e.0, message: "batch_size must be at least 1".into() });
        }
    }
    if let Some(e) = get("cadence") {
        settings.metric_cadence = at(e, scalar)?;
    }
    if let Some(e) = get("x0") {
        settings.x0 = Some(at(e, list)?);
    }
    if let Some(e) = get("x0_scale") {
        settings.x0_scale = at(e, scalar)?;
    }
    if let Some(e) = get("store_iterates") {
        settings.store_iterates = at(e, scalar)?;
    }
    if let Some(e) = get("divergence_threshold") {
        settings.divergence_threshold = at(e, scalar)?;
    }
    let output = get("output").map(|e| PathBuf::from(&e.1));

    let sweep = match (get("sweep_param"), get("sweep_values")) {
        (None, None) => None,
        (Some(p), Some(v)) => {
            let values: Vec<f64> = at(v, list)?;
            let axis = SweepAxis { param: p.1.clone(), values };
            axis.policies(&settings.policy).map_err(|e| Error::Config { line: v.0, message: e.to_string() })?;
            Some(axis)
        }
        (Some(_), None) => return Err(Error::ConfigInvalid("`sweep_param` needs `sweep_values`".into())),
        (None, Some(_)) => return Err(Error::ConfigInvalid("`sweep_values` needs `sweep_param`".into())),
    };

    let experiment = ExperimentConfig { problem, settings, seeds: seed_list, output };
    experiment.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    Ok(ConfigFile { experiment, sweep })
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::File { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

/// Renders a config back into the file format.
pub fn render_config(cfg: &ConfigFile) -> String {
    let e = &cfg.experiment;
    let s = &e.settings;
    let join = |v: &[String]| v.join(", ");
    let mut out = format!(
        "problem = {}\npolicy = {}\nsteps = {}\nseeds = {}\nsampler = {}\nbatch_size = {}\ncadence = {}\nx0_scale = {}\nstore_iterates = {}\ndivergence_threshold = {:e}\n",
        e.problem,
        s.policy,
        s.steps,
        join(&e.seeds.iter().map(u64::to_string).collect::<Vec<_>>()),
        s.sampler,
        s.batch_size,
        s.metric_cadence,
        s.x0_scale,
        s.store_iterates,
        s.divergence_threshold,
    );
    if let Some(x0) = &s.x0 {
        out.push_str(&format!("x0 = {}\n", join(&x0.iter().map(f64::to_string).collect::<Vec<_>>())));
    }
    if let Some(o) = &e.output {
        out.push_str(&format!("output = {}\n", o.display()));
    }
    if let Some(sw) = &cfg.sweep {
        out.push_str(&format!(
            "sweep_param = {}\nsweep_values = {}\n",
            sw.param,
            join(&sw.values.iter().map(f64::to_string).collect::<Vec<_>>())
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "problem = quadratic1d(lambda=1.2, f_star=0.1)\npolicy = ngn(sigma=1)\nsteps = 100\n";

    #[test]
    fn minimal_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.experiment.seeds, vec![0]);
        assert_eq!(cfg.experiment.settings.steps, 100);
        assert_eq!(cfg.experiment.settings.sampler, SamplerMode::WithReplacement);
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn full_file() {
        let text = "# header\nproblem = two_quadratics\npolicy = ngn(sigma=3) # trailing\n\nsteps=10\nseeds = 0..4\nsampler = full_batch\nbatch_size = 2\ncadence = 1\nx0 = 3\nx0_scale = 0.5\nstore_iterates = true\noutput = out/x\ndivergence_threshold = 1e10\nsweep_param = sigma\nsweep_values = 0.3, 1, 3\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.experiment.seeds, vec![0, 1, 2, 3]);
        assert_eq!(cfg.experiment.settings.x0, Some(vec![3.0]));
        assert_eq!(cfg.experiment.output, Some(PathBuf::from("out/x")));
        assert_eq!(cfg.sweep.as_ref().unwrap().values, vec![0.3, 1.0, 3.0]);
        assert_eq!(parse_config(&render_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn errors_carry_lines() {
        let cases = [
            ("problem = quadratic1d(lambda=1)\npolicy = ngn(sigma=0)\nsteps = 1\n", 2),
            ("problem = nope\npolicy = ngn(sigma=1)\nsteps = 1\n", 1),
            ("problem = two_quadratics\npolicy = ngn(sigma=1)\nsteps = 0\n", 3),
            ("problem = two_quadratics\nwhat\n", 2),
            ("problem = two_quadratics\ncolour = red\n", 2),
            ("problem = two_quadratics\nproblem = two_quadratics\n", 2),
            ("problem = two_quadratics\npolicy = ngn(sigma=1)\nsteps = 5\nseeds = a\n", 4),
            ("problem = two_quadratics\npolicy = ngn(sigma=1)\nsteps = 5\nsweep_param = gamma\nsweep_values = 1\n", 5),
        ];
        for (text, line) in cases {
            match parse_config(text) {
                Err(Error::Config { line: got, .. }) => assert_eq!(got, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn semantic_errors() {
        for text in [
            "policy = ngn(sigma=1)\nsteps = 1\n",
            "problem = two_quadratics\npolicy = armijo()\nsteps = 5\n",
            "problem = two_quadratics\npolicy = ngn(sigma=1)\nsteps = 5\nsweep_param = sigma\n",
        ] {
            assert!(matches!(parse_config(text), Err(Error::ConfigInvalid(_))), "{text}");
        }
    }

    proptest! {
        #[test]
        fn parsing_is_total(text in "\\PC{0,200}") {
            let _ = parse_config(&text);
        }

        #[test]
        fn parsing_is_total_on_config_like_lines(lines in prop::collection::vec("[a-z_]{1,12} ?= ?[a-z0-9_(),.= -]{0,30}", 0..12)) {
            let _ = parse_config(&lines.join("\n"));
        }
    }
}
