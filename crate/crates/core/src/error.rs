use thiserror::Error;

/// Errors raised by the solvers, generators and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numeric failure after {iterations} iterations: {reason}")]
    NumericFailure { iterations: usize, reason: String },

    #[error("iterate became non-finite after {iterations} iterations")]
    Diverged {
        iterations: usize,
        /// Flattened last finite iterate.
        last_finite: Vec<f64>,
    },

    #[error("missing ground truth: {0}")]
    MissingTruth(&'static str),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(iterations: usize, reason: impl Into<String>) -> Self {
        Error::NumericFailure {
            iterations,
            reason: reason.into(),
        }
    }

    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(Error::DimensionMismatch { expected, got });
        }
        Ok(())
    }
}
