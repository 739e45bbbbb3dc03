use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index {index} out of range (max {max})")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("truncation insufficient: {0}")]
    Truncation(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid bracket: {0}")]
    InvalidBracket(String),
    #[error("no Bell violation: {0}")]
    NoViolation(String),
    #[error("non-monotone response: {0}")]
    NonMonotone(String),
    #[error("quadrature grid insufficient: {0}")]
    GridInsufficient(String),
    #[error("angle {0} not present in the model's angle set")]
    MissingAngle(f64),
    #[error("scan failed at alpha = {alpha}: {source}")]
    ScanPoint {
        alpha: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Truncation(_)
            | Error::InvalidBracket(_)
            | Error::NoViolation(_)
            | Error::NonMonotone(_)
            | Error::GridInsufficient(_) => true,
            Error::ScanPoint { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
