use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use ngn_core::objectives::{gaussian_blobs, make_linear_regression, write_libsvm, write_libsvm_rows};
use ngn_core::syntax::CallExpr;

use crate::Failure;

/// Parsed `datagen` specification.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Blobs { n: usize, d: usize, classes: usize, seed: u64, spread: f64 },
    LinReg { d: usize, n: usize, seed: u64, noise: f64 },
}

fn to_usize(v: u64) -> anyhow::Result<usize> {
    usize::try_from(v).map_err(|_| anyhow!("{v} is too large"))
}

pub fn parse(spec: &str) -> anyhow::Result<DataSpec> {
    let expr: CallExpr = spec.parse().map_err(|e: ngn_core::syntax::SyntaxError| anyhow!(e.0))?;
    let mut r = expr.reader();
    let err = |e: ngn_core::syntax::SyntaxError| anyhow!(e.0);
    let parsed = match expr.name.as_str() {
        "blobs" => DataSpec::Blobs {
            n: to_usize(r.u64("n").map_err(err)?)?,
            d: to_usize(r.u64("d").map_err(err)?)?,
            classes: to_usize(r.u64_or("classes", 3).map_err(err)?)?,
            seed: r.u64_or("seed", 0).map_err(err)?,
            spread: r.f64_or("spread", 2.0).map_err(err)?,
        },
        "linreg" => DataSpec::LinReg {
            d: to_usize(r.u64("d").map_err(err)?)?,
            n: to_usize(r.u64("n").map_err(err)?)?,
            seed: r.u64_or("seed", 0).map_err(err)?,
            noise: r.f64_or("noise", 0.0).map_err(err)?,
        },
        other => bail!("unknown dataset kind `{other}` (expected blobs or linreg)"),
    };
    r.finish().map_err(err)?;
    Ok(parsed)
}

pub fn datagen(spec: &str, path: &Path) -> Result<(), Failure> {
    let parsed = parse(spec).map_err(Failure::Config)?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display())).map_err(Failure::Run)?;
    let out = BufWriter::new(file);
    let written = match parsed {
        DataSpec::Blobs { n, d, classes, seed, spread } => {
            let data = gaussian_blobs(n, d, classes, seed, spread).map_err(|e| Failure::Config(e.into()))?;
            write_libsvm(&data, out).map(|_| n)
        }
        DataSpec::LinReg { d, n, seed, noise } => {
            let reg = make_linear_regression(d, n, seed, noise).map_err(|e| Failure::Config(e.into()))?;
            let rows: Vec<&[f64]> = (0..n).map(|i| reg.row(i)).collect();
            write_libsvm_rows(&rows, reg.targets(), out).map(|_| n)
        }
    };
    let n = written.with_context(|| format!("writing {}", path.display())).map_err(Failure::Run)?;
    println!("wrote {n} samples to {}", path.display());
    Ok(())
}
