use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A data file failed to parse. `row` is the 1-based data row (header excluded).
    #[error("{file}: row {row}: {message}")]
    Row {
        file: String,
        row: usize,
        message: String,
    },

    #[error("{file}: {message}")]
    Schema { file: String, message: String },

    #[error("no feature vector for team '{team}' in tournament year {year}")]
    MissingFeatures { team: String, year: i32 },

    #[error("invalid tournament configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },

    /// An iterative fit stopped without meeting its tolerance.
    #[error("{what} did not reach loss {tolerance} in {} iterations (last loss {:.4})", trace.len(), trace.last().copied().unwrap_or(f64::NAN))]
    LossNotReached {
        what: &'static str,
        tolerance: f64,
        trace: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("model file: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn row(file: &str, row: usize, message: impl Into<String>) -> Self {
        Error::Row {
            file: file.to_string(),
            row,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 for data/IO problems, 3 for numerical failures. Usage errors (1)
    /// are produced by the argument parser before any of these can occur.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. } | Error::LossNotReached { .. } | Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}
