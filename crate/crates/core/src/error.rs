use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: no valid rows")]
    NoValidRows { path: PathBuf },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge: value {value:e}, error estimate {error:e} after {intervals} intervals")]
    QuadratureNonConvergence {
        value: f64,
        error: f64,
        intervals: usize,
    },

    #[error("circulant embedding not nonnegative definite (min eigenvalue {min_eigenvalue:e}) at embedding size {size}")]
    EmbeddingNotDefinite { min_eigenvalue: f64, size: usize },

    #[error("cholesky generator limited to n <= {cap}, requested {requested}")]
    CholeskyTooLarge { requested: usize, cap: usize },

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular integrand: {0}")]
    Singular(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short stable identifier, used in machine-readable error lines and FFI codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::InvalidInput(_) => "invalid_input",
            Error::Io { .. } => "io",
            Error::NoValidRows { .. } => "no_valid_rows",
            Error::Degenerate(_) => "degenerate",
            Error::QuadratureNonConvergence { .. } => "quadrature",
            Error::EmbeddingNotDefinite { .. } => "embedding",
            Error::CholeskyTooLarge { .. } => "cholesky_cap",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Singular(_) => "singular",
            Error::Json(_) => "json",
        }
    }
}
