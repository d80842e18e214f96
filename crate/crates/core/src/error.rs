use thiserror::Error;

/// Errors produced by the quantized-DC library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The noise standard deviation is zero, so cell probabilities collapse to indicators.
    #[error("degenerate noise: sigma must be > 0")]
    DegenerateNoise,

    /// Fisher information below the reporting threshold; the CRLB is effectively unbounded.
    #[error("Fisher information {information:e} is below threshold, CRLB unbounded")]
    UnboundedCrlb { information: f64 },

    #[error("transition levels are not strictly increasing at index {index}")]
    NonMonotoneLevels { index: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
