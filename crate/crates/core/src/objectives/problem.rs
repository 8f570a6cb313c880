use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::*;
use crate::syntax::{CallExpr, SyntaxError};

/// Where a classification dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Blobs { n: usize, d: usize, classes: usize, seed: u64, spread: f64 },
    /// LIBSVM text, or CSV when the extension is `.csv`.
    File(PathBuf),
}

/// Declarative problem description, written as e.g.
/// `quadratic1d(lambda=1.2, x_star=0, f_star=0.1)` or
/// `logistic(n=300, d=5, classes=3, seed=1, l2=0.01)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic1d { lambda: f64, x_star: f64, f_star: f64 },
    TwoQuadratics,
    LinearRegression { d: usize, n: usize, seed: u64, noise_std: f64 },
    LinearRegressionFile(PathBuf),
    Logistic { source: DataSource, l2: f64 },
    Nonconvex { n: usize, seed: u64, eps: f64 },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Box<dyn FiniteSumObjective>> {
        Ok(match self {
            ProblemSpec::Quadratic1d { lambda, x_star, f_star } => {
                Box::new(make_quadratic1d(*lambda, *x_star, *f_star)?)
            }
            ProblemSpec::TwoQuadratics => Box::new(make_two_quadratics()),
            ProblemSpec::LinearRegression { d, n, seed, noise_std } => {
                Box::new(make_linear_regression(*d, *n, *seed, *noise_std)?)
            }
            ProblemSpec::LinearRegressionFile(path) => {
                let file = std::fs::File::open(path).map_err(|source| Error::File { path: path.clone(), source })?;
                let samples = read_libsvm(file)?;
                Box::new(LinearRegression::from_rows(&samples.rows, samples.labels)?)
            }
            ProblemSpec::Logistic { source, l2 } => {
                let data = match source {
                    DataSource::Blobs { n, d, classes, seed, spread } => gaussian_blobs(*n, *d, *classes, *seed, *spread)?,
                    DataSource::File(path) if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => {
                        load_csv(path)?
                    }
                    DataSource::File(path) => load_libsvm(path)?,
                };
                Box::new(make_logistic(data, *l2)?)
            }
            ProblemSpec::Nonconvex { n, seed, eps } => {
                let base = make_nonconvex_sum(*n, *seed)?;
                if *eps == DEFAULT_CURVATURE {
                    Box::new(base)
                } else {
                    Box::new(NonconvexSum::new(base.centers().to_vec(), *eps)?)
                }
            }
        })
    }

    fn from_expr(e: &CallExpr) -> Result<Self, SyntaxError> {
        let mut r = e.reader();
        let usize_arg = |r: &mut crate::syntax::ArgReader<'_>, key: &str| -> Result<usize, SyntaxError> {
            let v = r.u64(key)?;
            usize::try_from(v).map_err(|_| SyntaxError(format!("argument `{key}` is too large")))
        };
        let spec = match e.name.as_str() {
            "quadratic1d" => ProblemSpec::Quadratic1d {
                lambda: r.f64("lambda")?,
                x_star: r.f64_or("x_star", 0.0)?,
                f_star: r.f64_or("f_star", 0.0)?,
            },
            "two_quadratics" => ProblemSpec::TwoQuadratics,
            "linear_regression" => match r.opt_str("file") {
                Some(path) => ProblemSpec::LinearRegressionFile(path.into()),
                None => ProblemSpec::LinearRegression {
                    d: usize_arg(&mut r, "d")?,
                    n: usize_arg(&mut r, "n")?,
                    seed: r.u64_or("seed", 0)?,
                    noise_std: r.f64_or("noise", 0.0)?,
                },
            },
            "logistic" => {
                let source = match r.opt_str("file") {
                    Some(path) => DataSource::File(path.into()),
                    None => DataSource::Blobs {
                        n: usize_arg(&mut r, "n")?,
                        d: usize_arg(&mut r, "d")?,
                        classes: usize::try_from(r.u64_or("classes", 3)?).unwrap_or(usize::MAX),
                        seed: r.u64_or("seed", 0)?,
                        spread: r.f64_or("spread", 2.0)?,
                    },
                };
                ProblemSpec::Logistic { source, l2: r.f64_or("l2", 0.0)? }
            }
            "nonconvex" => ProblemSpec::Nonconvex {
                n: usize_arg(&mut r, "n")?,
                seed: r.u64_or("seed", 0)?,
                eps: r.f64_or("eps", DEFAULT_CURVATURE)?,
            },
            other => return Err(SyntaxError(format!("unknown problem `{other}`"))),
        };
        r.finish()?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), SyntaxError> {
        let fail = |m: String| Err(SyntaxError(m));
        match self {
            ProblemSpec::Quadratic1d { lambda, f_star, .. } => {
                if !(*lambda > 0.0) {
                    return fail(format!("lambda must be positive, got {lambda}"));
                }
                if !(*f_star >= 0.0) {
                    return fail(format!("f_star must be nonnegative, got {f_star}"));
                }
            }
            ProblemSpec::LinearRegression { d, n, noise_std, .. } => {
                if *d == 0 || *n == 0 {
                    return fail("d and n must be at least 1".into());
                }
                if !(*noise_std >= 0.0) {
                    return fail(format!("noise must be nonnegative, got {noise_std}"));
                }
            }
            ProblemSpec::Logistic { source, l2 } => {
                if !(*l2 >= 0.0) {
                    return fail(format!("l2 must be nonnegative, got {l2}"));
                }
                if let DataSource::Blobs { n, d, classes, spread, .. } = source {
                    if *n == 0 || *d == 0 || *classes < 2 || !(*spread > 0.0) {
                        return fail("blobs need n, d >= 1, classes >= 2 and spread > 0".into());
                    }
                }
            }
            ProblemSpec::Nonconvex { n, eps, .. } => {
                if *n == 0 || !(*eps > 0.0) {
                    return fail("nonconvex needs n >= 1 and eps > 0".into());
                }
            }
            ProblemSpec::TwoQuadratics | ProblemSpec::LinearRegressionFile(_) => {}
        }
        Ok(())
    }
}

impl FromStr for ProblemSpec {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_expr(&s.parse()?)
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::Quadratic1d { lambda, x_star, f_star } => {
                write!(f, "quadratic1d(lambda={lambda}, x_star={x_star}, f_star={f_star})")
            }
            ProblemSpec::TwoQuadratics => f.write_str("two_quadratics"),
            ProblemSpec::LinearRegression { d, n, seed, noise_std } => {
                write!(f, "linear_regression(d={d}, n={n}, seed={seed}, noise={noise_std})")
            }
            ProblemSpec::LinearRegressionFile(p) => write!(f, "linear_regression(file={})", p.display()),
            ProblemSpec::Logistic { source: DataSource::Blobs { n, d, classes, seed, spread }, l2 } => write!(
                f,
                "logistic(n={n}, d={d}, classes={classes}, seed={seed}, spread={spread}, l2={l2})"
            ),
            ProblemSpec::Logistic { source: DataSource::File(p), l2 } => {
                write!(f, "logistic(file={}, l2={l2})", p.display())
            }
            ProblemSpec::Nonconvex { n, seed, eps } => write!(f, "nonconvex(n={n}, seed={seed}, eps={eps})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for text in [
            "quadratic1d(lambda=1.2, x_star=0, f_star=0.1)",
            "two_quadratics",
            "linear_regression(d=3, n=10, seed=4, noise=0.5)",
            "logistic(n=30, d=2, classes=3, seed=1, spread=2, l2=0.01)",
            "nonconvex(n=8, seed=0, eps=0.1)",
        ] {
            let spec: ProblemSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
            assert_eq!(spec.to_string().parse::<ProblemSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn builds_each_family() {
        for text in [
            "quadratic1d(lambda=2)",
            "two_quadratics",
            "linear_regression(d=3, n=10)",
            "logistic(n=30, d=2, l2=0.01)",
            "nonconvex(n=4)",
            "nonconvex(n=4, eps=0.2)",
        ] {
            let obj = text.parse::<ProblemSpec>().unwrap().build().unwrap();
            assert!(obj.num_components() >= 1, "{text}");
        }
    }

    #[test]
    fn rejects_invalid() {
        for text in [
            "quadratic1d(lambda=0)",
            "quadratic1d(lambda=1, f_star=-1)",
            "quadratic1d",
            "bogus(a=1)",
            "two_quadratics(x=1)",
            "logistic(n=10, d=2, classes=1)",
            "nonconvex(n=0)",
        ] {
            assert!(text.parse::<ProblemSpec>().is_err(), "{text}");
        }
    }
}
