use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed user input: bad profile, non-finite matrix, Im z <= 0, ...
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// No root of the limit equation lies in the closed upper half-plane.
    #[error("branch lost at z = {z}: no root with nonnegative imaginary part among {roots:?}")]
    BranchLoss { z: Complex64, roots: Vec<Complex64> },

    /// An internal invariant failed (should not happen for valid input).
    #[error("structural failure: {0}")]
    Structural(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
