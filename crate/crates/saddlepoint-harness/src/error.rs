use std::path::PathBuf;

use saddlepoint::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Malformed JSON; the message carries line and column.
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{path}:{line}: {message}")]
    MatrixMarket { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Solver(#[from] SolverError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("validation suite `{0}` failed")]
    SuiteFailed(String),
}

impl HarnessError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { field: field.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for configuration problems, 3 for violated
    /// preconditions, 4 for iteration caps, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Json { .. } | Self::Config { .. } | Self::MatrixMarket { .. } => 2,
            Self::Solver(e) => solver_exit_code(e),
            _ => 1,
        }
    }
}

pub fn solver_exit_code(e: &SolverError) -> i32 {
    match e {
        SolverError::InvalidConfig(_) | SolverError::InvalidParams(_) | SolverError::DimensionMismatch { .. } => 2,
        SolverError::PreconditionViolated(_) => 3,
        SolverError::InnerIterationCap(_) => 4,
        _ => 1,
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
