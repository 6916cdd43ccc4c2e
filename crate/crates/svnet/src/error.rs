//! Crate-wide error type with process exit-code classification.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path} row {row}: {msg}")]
    Parse { path: String, row: u64, msg: String },

    #[error("duplicate entry ({holder},{asset}) with conflicting shares {first} vs {second}")]
    ConflictingDuplicate {
        holder: String,
        asset: String,
        first: f64,
        second: f64,
    },

    #[error("delta networks need two distinct dates, got {0} twice")]
    IdenticalDates(String),

    #[error("unknown node: {0}")]
    UnknownNode(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("weighted analytics on binary-only snapshot {0}")]
    BinaryOnly(String),

    #[error("BiCM fit did not converge: residual {residual:.3e} after {iterations} iterations")]
    FitNotConverged { residual: f64, iterations: usize },

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error(
        "exhaustive oracle supports at most {cap} trials, got {trials}; use the Monte-Carlo oracle"
    )]
    EnumerationCap { trials: usize, cap: usize },

    #[error("observed overlap {overlap} exceeds min degree {bound}")]
    OverlapExceedsDegree { overlap: usize, bound: usize },

    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Analytics(String),
}

impl Error {
    /// Exit code for the CLI: 1 input error, 2 numerical failure, 3 oracle mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::FitNotConverged { .. } => 2,
            Error::OracleMismatch(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
