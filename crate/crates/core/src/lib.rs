//! Spectral quasi-reversibility for recovering the spatial source of a
//! bi-parabolic equation from final-time data.
//!
//! Everything is generic over [`scalar::Real`]; the aliases below fix the
//! working precision.

pub mod error;
pub mod forward;
pub mod harness;
pub mod qrm;
pub mod quadrature;
pub mod scalar;
pub mod spectral;
pub mod temporal;

pub use error::{Error, Result};
pub use forward::ForwardOperator;
pub use qrm::{QrmSolver, RegularizerConfig};
pub use scalar::Real;
pub use spectral::{FieldRole, SmoothnessClass, SpectralCoefficients, SpectralDomain};
pub use temporal::TemporalProfile;

pub type SpectralDomainF64 = SpectralDomain<f64>;
pub type SpectralCoefficientsF64 = SpectralCoefficients<f64>;
pub type TemporalProfileF64 = TemporalProfile<f64>;
pub type ForwardOperatorF64 = ForwardOperator<f64>;
pub type QrmSolverF64 = QrmSolver<f64>;

pub type SpectralDomainF32 = SpectralDomain<f32>;
pub type SpectralCoefficientsF32 = SpectralCoefficients<f32>;
pub type TemporalProfileF32 = TemporalProfile<f32>;
pub type ForwardOperatorF32 = ForwardOperator<f32>;
pub type QrmSolverF32 = QrmSolver<f32>;
