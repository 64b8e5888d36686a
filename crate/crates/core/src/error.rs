use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian at ({row}, {col}): mismatch {mismatch:e}")]
    NotHermitian { row: usize, col: usize, mismatch: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {min_eig:e} with largest {max_eig:e}")]
    NotPsd { min_eig: f64, max_eig: f64 },

    #[error("{function}: argument {arg:e} outside the domain of the {branch} branch")]
    Domain {
        function: &'static str,
        branch: &'static str,
        arg: f64,
    },

    #[error("condition number undefined: smallest eigenvalue is {0:e}")]
    ZeroEigenvalue(f64),

    #[error("singular matrix: eigenvalue {0:e}")]
    Singular(f64),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("did not converge after {iterations} iterations (rank trajectory {trajectory:?})")]
    Convergence {
        iterations: usize,
        trajectory: Vec<usize>,
    },

    #[error("covariance model error: {0}")]
    Model(String),

    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::ZeroEigenvalue(_)
                | Error::Singular(_)
                | Error::NoRoot(_)
                | Error::Convergence { .. }
                | Error::Model(_)
        )
    }
}
