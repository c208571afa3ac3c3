use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A great-circle step would pass over (or onto) a pole.
    #[error("trajectory crosses a pole (latitude {lat_deg:.6} deg)")]
    PoleCrossing { lat_deg: f64 },

    #[error("critic block W_uu = {w_uu:e} is not invertible")]
    NonInvertible { w_uu: f64 },

    #[error("Riccati iteration did not converge after {iterations} iterations")]
    RiccatiDivergence { iterations: usize },

    /// Semantic violation, addressed by `section.field`.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("simulation failed at tick {tick}: {source}")]
    Simulation {
        tick: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("could not encode {artifact}: {reason}")]
    Encode {
        artifact: &'static str,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn encode(artifact: &'static str, reason: impl ToString) -> Self {
        Error::Encode {
            artifact,
            reason: reason.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than by a failing run.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::Parse { .. })
    }
}
