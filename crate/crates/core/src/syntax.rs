//! Parser for the `name(key=value, ...)` call syntax shared by policy, problem
//! and dataset specifications.

use std::fmt;
use std::str::FromStr;

/// A parsed `name(key=value, ...)` expression. A bare `name` has no arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct CallExpr {
    pub name: String,
    pub args: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError(pub String);

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SyntaxError {}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl FromStr for CallExpr {
    type Err = SyntaxError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let s = input.trim();
        if s.is_empty() {
            return Err(SyntaxError("empty expression".into()));
        }
        let (name, rest) = match s.find('(') {
            Some(open) => (&s[..open], Some(&s[open + 1..])),
            None => (s, None),
        };
        let name = name.trim();
        if !is_ident(name) {
            return Err(SyntaxError(format!("invalid name `{name}`")));
        }
        let mut args = Vec::new();
        if let Some(rest) = rest {
            let body = rest
                .strip_suffix(')')
                .ok_or_else(|| SyntaxError(format!("missing `)` in `{s}`")))?;
            if body.contains('(') || body.contains(')') {
                return Err(SyntaxError(format!("unbalanced parentheses in `{s}`")));
            }
            for part in body.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    if body.trim().is_empty() {
                        continue;
                    }
                    return Err(SyntaxError(format!("empty argument in `{s}`")));
                }
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| SyntaxError(format!("argument `{part}` is not key=value")))?;
                let key = key.trim();
                let value = value.trim();
                if !is_ident(key) {
                    return Err(SyntaxError(format!("invalid argument name `{key}`")));
                }
                if value.is_empty() {
                    return Err(SyntaxError(format!("argument `{key}` has no value")));
                }
                if args.iter().any(|(k, _)| k == key) {
                    return Err(SyntaxError(format!("duplicate argument `{key}`")));
                }
                args.push((key.to_string(), value.to_string()));
            }
        }
        Ok(CallExpr {
            name: name.to_string(),
            args,
        })
    }
}

impl CallExpr {
    /// Consumes arguments by name and reports leftovers.
    pub fn reader(&self) -> ArgReader<'_> {
        ArgReader {
            expr: self,
            used: vec![false; self.args.len()],
        }
    }
}

impl fmt::Display for CallExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (idx, (k, v)) in self.args.iter().enumerate() {
                if idx > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{k}={v}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

pub struct ArgReader<'a> {
    expr: &'a CallExpr,
    used: Vec<bool>,
}

impl ArgReader<'_> {
    fn raw(&mut self, key: &str) -> Option<&str> {
        let idx = self.expr.args.iter().position(|(k, _)| k == key)?;
        self.used[idx] = true;
        Some(&self.expr.args[idx].1)
    }

    pub fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, SyntaxError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| SyntaxError(format!("argument `{key}`: `{v}` is not a number"))),
        }
    }

    pub fn f64(&mut self, key: &str) -> Result<f64, SyntaxError> {
        let name = self.expr.name.clone();
        self.opt_f64(key)?
            .ok_or_else(|| SyntaxError(format!("`{name}` requires argument `{key}`")))
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, SyntaxError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    pub fn opt_u64(&mut self, key: &str) -> Result<Option<u64>, SyntaxError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<u64>().map(Some).map_err(|_| {
                SyntaxError(format!("argument `{key}`: `{v}` is not a nonnegative integer"))
            }),
        }
    }

    pub fn u64(&mut self, key: &str) -> Result<u64, SyntaxError> {
        let name = self.expr.name.clone();
        self.opt_u64(key)?
            .ok_or_else(|| SyntaxError(format!("`{name}` requires argument `{key}`")))
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64, SyntaxError> {
        Ok(self.opt_u64(key)?.unwrap_or(default))
    }

    pub fn opt_str(&mut self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    /// Fails if any argument was never read.
    pub fn finish(self) -> Result<(), SyntaxError> {
        match self.used.iter().position(|u| !u) {
            Some(idx) => Err(SyntaxError(format!(
                "`{}` does not accept argument `{}`",
                self.expr.name, self.expr.args[idx].0
            ))),
            None => Ok(()),
        }
    }
}
