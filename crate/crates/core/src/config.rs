//! Flat `key = value` configuration files and closed-form field specs.
//!
//! ```text
//! # comment
//! grid.nx = 65
//! sweep.amplitudes = 1e-4, 1e-3, 1e-2
//! bdry.g = cos-product
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fields::{boundary_trace, io, BoundaryTrace, Grid, ScalarField};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl FromStr for Config {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key", n + 1)));
            }
            if entries
                .insert(key.to_string(), v.trim().to_string())
                .is_some()
            {
                return Err(Error::Parse(format!(
                    "line {}: duplicate key '{key}'",
                    n + 1
                )));
            }
        }
        Ok(Config { entries })
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        fs::read_to_string(path)
            .map_err(|e| Error::io(path, e))?
            .parse()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Parse(format!("{key}: cannot parse '{v}'"))),
        }
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Parse(format!("{key}: cannot parse '{v}'")))
            })
            .transpose()
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => parse_list(v).map_err(|_| Error::Parse(format!("{key}: bad list '{v}'"))),
        }
    }

    /// Reject keys outside `known`, catching typos early.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.keys().find(|k| !known.contains(k)) {
            Some(k) => Err(Error::Parse(format!("unknown config key '{k}'"))),
            None => Ok(()),
        }
    }

    /// Canonical text, sorted by key.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

pub fn parse_list(v: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

/// Closed-form or file-backed field description.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    /// `const:<c>`
    Constant(f64),
    /// `linear:<a>,<b>,<c>` → a + b x + c y
    Linear(f64, f64, f64),
    /// `cos-product` → cos x · cos y (cos x in 1D)
    CosProduct,
    /// `sin-x` → sin x
    SinX,
    /// `nodal:<a>,<x0>,<b>` → sin(a (x − x0))·e^{b y}, solving Δu + (a² − b²) u = 0
    Nodal { a: f64, x0: f64, b: f64 },
    /// `file:<path>`
    File(PathBuf),
}

impl FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || parse_list(args).map_err(|_| Error::Parse(format!("bad field spec '{s}'")));
        let spec = match head {
            "const" => match nums()?.as_slice() {
                [c] => FieldSpec::Constant(*c),
                _ => return Err(Error::Parse(format!("'{s}': const takes one value"))),
            },
            "linear" => match nums()?.as_slice() {
                [a, b, c] => FieldSpec::Linear(*a, *b, *c),
                _ => return Err(Error::Parse(format!("'{s}': linear takes three values"))),
            },
            "cos-product" => FieldSpec::CosProduct,
            "sin-x" => FieldSpec::SinX,
            "nodal" => match nums()?.as_slice() {
                [a, x0, b] => FieldSpec::Nodal {
                    a: *a,
                    x0: *x0,
                    b: *b,
                },
                _ => return Err(Error::Parse(format!("'{s}': nodal takes three values"))),
            },
            "file" if !args.is_empty() => FieldSpec::File(PathBuf::from(args)),
            _ => {
                // a bare number is a constant
                match s.parse::<f64>() {
                    Ok(c) => FieldSpec::Constant(c),
                    Err(_) => return Err(Error::Parse(format!("unknown field spec '{s}'"))),
                }
            }
        };
        Ok(spec)
    }
}

impl FieldSpec {
    pub fn eval(&self, x: f64, y: f64) -> Option<f64> {
        Some(match *self {
            FieldSpec::Constant(c) => c,
            FieldSpec::Linear(a, b, c) => a + b * x + c * y,
            FieldSpec::CosProduct => x.cos() * y.cos(),
            FieldSpec::SinX => x.sin(),
            FieldSpec::Nodal { a, x0, b } => (a * (x - x0)).sin() * (b * y).exp(),
            FieldSpec::File(_) => return None,
        })
    }

    pub fn field(&self, grid: &Grid) -> Result<ScalarField> {
        match self {
            FieldSpec::File(path) => {
                let f = io::read_field(path)?;
                if f.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                Ok(f)
            }
            spec => ScalarField::from_fn(grid, |x, y| spec.eval(x, y).unwrap()),
        }
    }

    pub fn trace(&self, grid: &Grid) -> Result<BoundaryTrace> {
        match self {
            FieldSpec::File(_) => Ok(boundary_trace(&self.field(grid)?)),
            spec => Ok(BoundaryTrace::from_fn(grid, |x, y| {
                spec.eval(x, y).unwrap()
            })),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys() {
        let c: Config = "# header\nsolver.tol = 1e-9\n\nsweep.amplitudes = 1e-3, 1e-2 # trailing\n"
            .parse()
            .unwrap();
        assert_eq!(c.parse_or("solver.tol", 0.0).unwrap(), 1e-9);
        assert_eq!(
            c.list_or("sweep.amplitudes", &[]).unwrap(),
            vec![1e-3, 1e-2]
        );
        assert_eq!(c.parse_or("recon.max_iter", 7usize).unwrap(), 7);
        assert!(c.check_known(&["solver.tol"]).is_err());
        assert!(c.check_known(&["solver.tol", "sweep.amplitudes"]).is_ok());
    }

    #[test]
    fn rejects_garbage() {
        assert!("novalue".parse::<Config>().is_err());
        assert!("a = 1\na = 2".parse::<Config>().is_err());
        let c: Config = "solver.tol = abc".parse().unwrap();
        assert!(c.parse_or("solver.tol", 1.0).is_err());
    }

    #[test]
    fn field_specs() {
        assert_eq!(
            "const:2".parse::<FieldSpec>().unwrap(),
            FieldSpec::Constant(2.0)
        );
        assert_eq!(
            "2.5".parse::<FieldSpec>().unwrap(),
            FieldSpec::Constant(2.5)
        );
        assert_eq!(
            "linear:1, 2, 3".parse::<FieldSpec>().unwrap(),
            FieldSpec::Linear(1.0, 2.0, 3.0)
        );
        assert_eq!(
            "cos-product".parse::<FieldSpec>().unwrap(),
            FieldSpec::CosProduct
        );
        assert!("linear:1,2".parse::<FieldSpec>().is_err());
        assert!("wave".parse::<FieldSpec>().is_err());
        let n: FieldSpec = "nodal:3.14,0.33,1".parse().unwrap();
        assert!(n.eval(0.33, 0.7).unwrap().abs() < 1e-15);
    }
}
