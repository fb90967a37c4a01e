use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid y-range [{y_min}, {y_max}]")]
    InvalidRange { y_min: f64, y_max: f64 },

    #[error("transform path mismatch: {0}")]
    TransformPath(String),

    #[error("negative input at node {index}: {value}")]
    NegativeValue { index: usize, value: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("evaluation at t={t} is past blow-up time {blowup}")]
    PastBlowup { t: f64, blowup: f64 },

    #[error("wrong domain case for {0}")]
    WrongCase(&'static str),

    #[error("bound not applicable: {0}")]
    BoundInapplicable(String),

    #[error("unachievable target: {0}")]
    Unachievable(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("step failure at t={t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("trajectory horizon {horizon} does not cover T={t}")]
    Horizon { t: f64, horizon: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
