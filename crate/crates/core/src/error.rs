use thiserror::Error;

/// Errors raised by the solver and its building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("oracle failure: piece {piece} returned non-finite value {value}")]
    OracleFailure { piece: usize, value: f64 },

    #[error("poisedness failure: no tuple with inverse norm <= {bound} after {rejections} rejections")]
    PoisednessFailure { bound: f64, rejections: usize },

    #[error("invalid radius {0}: must be positive and finite")]
    InvalidRadius(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular interpolation system")]
    SingularSystem,

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("zero approximate gradient (norm {0:e})")]
    ZeroGradient(f64),

    #[error("constants unavailable: {0}")]
    ConstantsUnavailable(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidProblem(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
