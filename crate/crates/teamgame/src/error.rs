//! Error type shared across the crate.

/// Everything that can go wrong while parsing, validating, or solving.
///
/// The variants group failures the way a caller wants to react to them:
/// `Schema`/`Dimension`/`Validation` mean the input is bad, `Numerical` means
/// the solve itself broke down, and `Structure` means an information-pattern
/// requirement (causality, quadratic invariance) is violated.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The JSON document does not match the instance schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Two arrays that must agree in size do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A covariance matrix fails the positive-definiteness gate.
    #[error("{name} is not positive definite (min eigenvalue {min_eig:e}, max eigenvalue {max_eig:e})")]
    NotPositiveDefinite {
        name: String,
        min_eig: f64,
        max_eig: f64,
    },

    /// A validated-instance invariant is broken.
    #[error("invalid instance: {0}")]
    Validation(String),

    /// Singular system, failed tolerance, or indefinite curvature.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Causality or quadratic-invariance requirement does not hold.
    #[error("structure error: {0}")]
    Structure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
