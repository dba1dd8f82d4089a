use std::path::PathBuf;

use crate::forward::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (bad grid, mismatched fields, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("fields live on different grids")]
    GridMismatch,

    /// The linear solve stagnated and 0 sits (numerically) in the spectrum of Δ + q.
    #[error("near-singular operator: eigen gap {gap:.3e} below threshold {threshold:.3e}")]
    NearSingular {
        gap: f64,
        threshold: f64,
        report: Box<SolveReport>,
    },

    #[error(
        "linear solver did not converge (residual {residual:.3e} after {iterations} iterations)"
    )]
    SolverStagnation {
        residual: f64,
        iterations: usize,
        report: Box<SolveReport>,
    },

    #[error("underdetermined fit: needs at least {needed} usable samples, got {usable}")]
    UnderdeterminedFit { usable: usize, needed: usize },

    #[error("ball integral vanishes (denominator {0:.3e})")]
    DegenerateBall(f64),

    #[error("trivial solution: ∫u² = 0 over the domain")]
    TrivialSolution,

    #[error("point {0} outside the admissible domain")]
    Domain(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NearSingular { .. } | Error::SolverStagnation { .. } => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }
}
