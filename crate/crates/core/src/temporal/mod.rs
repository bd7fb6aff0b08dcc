//! The time factor `ψ`, its kernel `μ_n`, and admissibility certificates.

mod admissibility;
mod mu;
mod profile;

pub use admissibility::{check_assumption, lower_bound_constant, AdmissibilityReport, AdmissibleCase, M_BOUND_SLACK};
pub use mu::{mu_coefficient, mu_quadrature, mu_sequence, MuSequence};
pub use profile::{BoundProvenance, DerivativeBound, Interpolation, ProfileShape, TemporalProfile, TrigPiece, CHECK_INTERVALS};
