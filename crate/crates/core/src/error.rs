use thiserror::Error;

/// Errors produced by the simulation modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("drive configuration rejected: {0}")]
    Drive(String),

    #[error("density matrix violates {property}: deviation {deviation:e}")]
    InvalidState {
        property: &'static str,
        deviation: f64,
    },

    #[error("stationary state is not unique ({dimension}-dimensional null space); supply an initial state")]
    DegenerateNullSpace { dimension: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("equilibrium solver did not converge for N = {n} (residual {residual:e})")]
    NoConvergence { n: usize, residual: f64 },

    #[error("Mathieu motion unstable for a = {a}, q = {q}")]
    Unstable { a: f64, q: f64 },

    #[error("loading-rate ratio check failed: {0}")]
    RatioOutOfRange(String),

    #[error(transparent)]
    Config(#[from] crate::config::ConfigErrors),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
