use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: wrong shape, out-of-range index, invalid parameter.
    #[error("invalid input: {0}")]
    Input(String),

    /// Input that fails a probabilistic invariant (negative weights, bad normalization).
    #[error("not a probability vector: {0}")]
    NotProbability(String),

    /// Dense tensor would exceed the configured cap.
    #[error("dense tensor of size {size} exceeds cap {cap}; use the symmetric (type-class) path")]
    DenseCapExceeded { size: u128, cap: usize },

    /// A loss function failed its admissibility checks.
    #[error("inadmissible loss: {0}")]
    Loss(String),

    /// A numerical routine failed to produce a usable value.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// Too few usable observations for a statistical conclusion.
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
