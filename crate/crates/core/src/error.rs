use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("binomial({n}+{m}-1, {n}) overflows the platform integer width")]
    DimensionOverflow { n: usize, m: usize },

    #[error("Hilbert space dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid occupation state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error("state is not normalized (norm^2 = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("eigensolver failed for a {dim}x{dim} matrix: {reason}")]
    EigenSolver { dim: usize, reason: String },

    #[error("energy {energy} lies outside the spectrum [{lo}, {hi}]")]
    EnergyOutOfRange { energy: f64, lo: f64, hi: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("memory estimate {needed_mb} MB exceeds the budget of {budget_mb} MB")]
    MemoryBudget { needed_mb: usize, budget_mb: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidState(_) => 1,
            Error::DimensionCap { .. } | Error::MemoryBudget { .. } => 1,
            Error::Io { .. } | Error::Csv { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
