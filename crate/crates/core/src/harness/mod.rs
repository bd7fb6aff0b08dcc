//! Experiments built on the solver: noise, stability, rates and optimality.

pub mod modulus;
pub mod noise;
pub mod optimality;
pub mod rate;
pub mod stability;
pub mod weyl;

pub use modulus::{
    consecutive_ratio_range, lp_vertex, modulus_bounds, modulus_closed_form, modulus_oracle, LpVertex, ModulusBounds,
    ModulusConvention, ModulusQuery, SubCase,
};
pub use noise::{add_noise, add_noise_along, decay_law_source, random_direction, rng_from_seed, sample_source, trial_seed};
pub use optimality::{optimality_check, OptimalityReport, OptimalityRow, OptimalitySpec};
pub use rate::{
    expected_exponent, fit_loglog, run_rate_experiment, ExperimentSpec, PointStatus, RatePoint, RateReport, RuleSpec,
    SlopeFit, SourceSpec, Verdict,
};
pub use stability::{conditional_stability_check, stability_bound, StabilityCheck};
pub use weyl::{weyl_ratio_check, WeylReport};
