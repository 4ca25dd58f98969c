//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by solvers, model construction, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// The transition matrix has spectral radius at or above the stability margin.
    #[error("matrix is not asymptotically stable (spectral radius {rho})")]
    NotStable { rho: f64 },

    /// A fixed-point iteration exhausted its budget before reaching tolerance.
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    /// The innovation covariance is numerically singular; signals bad input.
    #[error("innovation covariance is numerically singular: {0}")]
    SingularInnovation(String),

    /// NaN or infinite entries where finite values are required.
    #[error("non-finite entries: {0}")]
    NonFinite(String),

    /// Inconsistent or out-of-range dimensions.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// A matrix required to be positive definite failed its factorization.
    #[error("matrix is not positive definite: {0}")]
    NotPd(String),

    /// A model fails the structural requirements of an operation.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The innovation transform matrix could not be inverted.
    #[error("innovation transform is singular: {0}")]
    SingularTransform(String),

    /// Too few samples for the requested statistic.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

impl Error {
    /// Short stable code, used e.g. for CSV status columns.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotStable { .. } => "not_stable",
            Error::NonConvergence(_) => "non_convergence",
            Error::SingularInnovation(_) => "singular_innovation",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::NotPd(_) => "not_pd",
            Error::InvalidModel(_) => "invalid_model",
            Error::SingularTransform(_) => "singular_transform",
            Error::InsufficientSamples(_) => "insufficient_samples",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
