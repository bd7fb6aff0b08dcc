use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the spectral library.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type used
/// for the computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not reach tolerance {tolerance:e} (achieved error estimate {achieved:e})")]
    Quadrature { achieved: f64, tolerance: f64 },

    #[error("ill-conditioned inversion: |mu_{index}| = {value:e} is below the threshold {threshold:e}")]
    IllConditioned { index: usize, value: f64, threshold: f64 },

    #[error("profile is not admissible: {0}")]
    Inadmissible(String),

    #[error("invalid lower-bound certificate: {0}")]
    InvalidCertificate(String),

    #[error("discrepancy level {target:e} is not below ||h_delta|| = {norm:e}; data too noisy for this rule")]
    NoSolution { target: f64, norm: f64 },

    #[error("{context}: no convergence after {iterations} iterations")]
    NonConvergence { context: String, iterations: usize },

    #[error("degenerate fit: {valid} valid points, at least {required} required")]
    DegenerateFit { valid: usize, required: usize },

    #[error("theorem-level check failed: {0}")]
    TheoremViolation(String),
}
