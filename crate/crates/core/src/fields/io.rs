//! Text field files.
//!
//! ```text
//! FIELD v1 <nx> <ny> <lx> <ly>
//! <value 0>
//! ...
//! <value nx*ny-1>
//! ```
//!
//! Reals are written with 17 significant digits so that a write/read cycle is lossless.

use std::fs;
use std::path::Path;

use super::{Grid, ScalarField};
use crate::error::{Error, Result};

const MAGIC: &str = "FIELD";
const VERSION: &str = "v1";

/// Scientific notation with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_string(f: &ScalarField) -> String {
    let g = f.grid();
    let mut out = String::with_capacity(26 * (g.len() + 1));
    out.push_str(&format!(
        "{MAGIC} {VERSION} {} {} {} {}\n",
        g.nx,
        g.ny,
        fmt_real(g.lx),
        fmt_real(g.ly)
    ));
    for v in f.values() {
        out.push_str(&fmt_real(*v));
        out.push('\n');
    }
    out
}

pub fn from_str(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != MAGIC || parts[1] != VERSION {
        return Err(Error::Parse(format!("bad field header '{header}'")));
    }
    let nx: usize = parse(parts[2])?;
    let ny: usize = parse(parts[3])?;
    let lx: f64 = parse(parts[4])?;
    let ly: f64 = parse(parts[5])?;
    let grid = Grid::new(nx, ny, lx, ly)?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse::<f64>(l.trim()))
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(grid, values)
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("cannot parse '{s}'")))
}

pub fn write_field(path: &Path, f: &ScalarField) -> Result<()> {
    fs::write(path, to_string(f)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}
