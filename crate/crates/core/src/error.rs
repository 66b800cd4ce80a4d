use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The shifted moment matrix is singular or too badly conditioned to invert.
    #[error("degenerate moment matrix at shift velocity ({ux}, {uy}) (condition estimate {condition:.3e})")]
    DegenerateShift { ux: f64, uy: f64, condition: f64 },

    /// Density left the admissible range; treated as a blow-up of the state.
    #[error("non-positive density {rho}")]
    NonPositiveDensity { rho: f64 },

    #[error("eigenvalue iteration failed to converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
