use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A transmitter and its receiver (or an interferer and the receiver)
    /// sit at the same point, so the path-loss term is undefined.
    #[error("zero distance between transmitter and receiver")]
    ZeroDistance,

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: &'static str,
    },

    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid scenario field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("link ({from}, {to}) is not an edge of any path")]
    UnknownLink { from: String, to: String },

    #[error("link ({from}, {to}) has {count} interferers; subset enumeration is capped at {max}")]
    TooManyInterferers {
        from: String,
        to: String,
        count: usize,
        max: usize,
    },

    #[error("allocation has {got} rates but the scenario has {expected} flows")]
    AllocationShape { expected: usize, got: usize },

    #[error("grid search supports at most {max} decision variables, problem has {got}")]
    Dimension { got: usize, max: usize },

    #[error("unknown builtin topology {0} (expected 1, 2 or 3)")]
    UnknownTopology(u8),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            value,
            reason,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Numeric failures (domain errors, calibration divergence) as opposed to
    /// malformed input. The CLI maps the two classes to different exit codes.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ZeroDistance
                | Error::InvalidParameter { .. }
                | Error::TooManyInterferers { .. }
                | Error::Calibration(_)
        )
    }
}
