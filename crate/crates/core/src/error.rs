use thiserror::Error;

/// Errors produced by the simulation, witness and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular input: {0}")]
    SingularInput(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("fit failed after {iterations} iterations: {message}")]
    FitFailure { iterations: usize, message: String },

    /// The optimised squeezed component does not violate the witness, so no
    /// finite-statistics adversary mixture exists.
    #[error("no adversary: best squeezed-state witness is {w1} (not negative)")]
    NoAdversary { w1: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
