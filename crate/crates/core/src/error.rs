use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: a particle cloud needs at least one point")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite coordinate at point {index}")]
    NonFiniteCoordinate { index: usize },
    #[error("bin width must be positive and finite, got {0}")]
    BadBinWidth(f64),
    #[error("bad histogram range [{lo}, {hi}]")]
    BadRange { lo: f64, hi: f64 },
    #[error("size mismatch: {left} vs {right} points")]
    SizeMismatch { left: usize, right: usize },
    #[error("operation requires dimension {expected}, cloud has dimension {found}")]
    DimensionError { expected: usize, found: usize },
    #[error("problem size {size} exceeds the solver cap of {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("brute force limited to {max} points, got {size}")]
    TooLarge { size: usize, max: usize },
    #[error("transport plan row {0} carries no mass")]
    DegenerateRow(usize),
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("window shape error: {0}")]
    WindowShape(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("schedule misaligned with micro step: {0}")]
    ScheduleOverrun(String),
    #[error("the two runs share no snapshot times")]
    NoSharedTimes,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
