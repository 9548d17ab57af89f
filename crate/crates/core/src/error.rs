use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The rotation angle is too close to pi for the logarithm to pick a unique axis.
    #[error("rotation angle {angle} is within 1e-6 of pi")]
    AngleNearPi { angle: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is numerically singular even with damping")]
    NumericallySingular,

    #[error("window {window} s is shorter than the sampling interval {interval} s")]
    EmptyWindow { window: f64, interval: f64 },

    #[error("unknown task label `{0}`")]
    UnknownLabel(String),

    #[error("no constraint-satisfying candidate after {0} redraws")]
    ConstraintUnsatisfiable(usize),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}
