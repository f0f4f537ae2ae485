use thiserror::Error;

/// Errors raised by grid construction, sampling and the operator backends.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("unknown profile descriptor `{0}`")]
    UnknownProfile(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown backend `{0}` (expected spectral, riesz or dtn)")]
    UnknownBackend(String),
    #[error("ratio not constant: spread {spread:.3e} exceeds {limit:.3e}")]
    RatioNotConstant { spread: f64, limit: f64 },
    #[error("check not applicable: {0}")]
    NotApplicable(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
