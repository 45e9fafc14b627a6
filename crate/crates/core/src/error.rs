use thiserror::Error;

/// Errors produced by the estimator, its oracles and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside the kernel's covariate box, or has the wrong dimension.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} (largest {largest:e})")]
    NotPositiveSemidefinite { eigenvalue: f64, largest: f64 },

    #[error("bisection did not reach tolerance {tolerance:e} within {iterations} iterations")]
    Convergence { iterations: usize, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveSemidefinite { .. } | Error::Convergence { .. } | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
