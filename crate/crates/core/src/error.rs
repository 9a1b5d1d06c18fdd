use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A generator could not produce an object satisfying its checks.
    #[error("construction failed ({check}): {detail}")]
    Construction { check: String, detail: String },

    /// A run configuration failed validation before round 1.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value at agent {agent}, round {round}: {what}")]
    NonFinite {
        agent: usize,
        round: usize,
        what: String,
    },

    #[error("solver reached {iterations} iterations with gap {gap:e} > tol {tol:e}")]
    SolverCap {
        iterations: usize,
        gap: f64,
        tol: f64,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
