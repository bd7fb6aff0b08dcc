//! Observed worst-case QRM error against the modulus lower bound.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::modulus::{consecutive_ratio_range, lp_vertex, modulus_bounds, ModulusConvention, ModulusQuery, SubCase};
use super::noise::{add_noise_along, random_direction, rng_from_seed, sample_source, trial_seed};
use super::rate::RuleSpec;
use crate::error::{Error, Result};
use crate::forward::ForwardOperator;
use crate::qrm::{c_apri1, ChoiceRule, QrmSolver, RegularizerConfig, apriori_alpha, morozov_select};
use crate::scalar::Real;
use crate::spectral::{FieldRole, SmoothnessClass, SpectralCoefficients, SpectralDomain};
use crate::temporal::TemporalProfile;

pub const DEFAULT_SAMPLES: usize = 64;

#[derive(Debug, Clone)]
pub struct OptimalitySpec<T> {
    pub domain: Arc<SpectralDomain<T>>,
    pub profile: Arc<TemporalProfile<T>>,
    pub class: SmoothnessClass<T>,
    pub b: T,
    pub deltas: Vec<T>,
    pub rule: RuleSpec<T>,
    pub seed: u64,
    /// Random sources and noise directions per `δ`, on top of the LP vertex.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityRow<T> {
    pub delta: T,
    pub alpha_at_vertex: T,
    /// Largest `||f - f_α^δ||` over the sample.
    pub worst_error: T,
    /// Lower bound on the pairwise `ω(2δ, M_{r_2,p})`.
    pub omega_lower: T,
    pub omega_upper: T,
    pub sub_case: SubCase,
    /// `worst_error / omega_lower`.
    pub ratio: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport<T> {
    pub r2: T,
    pub convention: ModulusConvention,
    /// Constant of the upper error estimate `C_1 ϱ^{2/(p+2)} δ^{p/(p+2)}`.
    pub error_constant: T,
    pub band: [T; 2],
    pub rows: Vec<OptimalityRow<T>>,
    /// Every sampled source satisfied `||f||_{H_p} ≤ ϱ`.
    pub embedding_ok: bool,
    pub pass: bool,
}

impl<T: Real> OptimalitySpec<T> {
    pub fn validate(&self) -> Result<()> {
        let two = T::lit(2.0);
        let p = self.class.p;
        match self.rule {
            RuleSpec::Apriori if p > T::zero() && p < self.b => {}
            RuleSpec::Aposteriori { .. } if self.b > two && p > T::zero() && p < self.b - two => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "order optimality needs 0 < p < b (a priori) or b > 2, 0 < p < b - 2 (discrepancy); got p = {}, b = {}",
                    p, self.b
                )))
            }
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > T::zero() && d.is_finite())) {
            return Err(Error::InvalidArgument("noise levels must be positive and finite".into()));
        }
        Ok(())
    }
}

fn choose<T: Real>(spec: &OptimalitySpec<T>, h: &SpectralCoefficients<T>, delta: T) -> Result<RegularizerConfig<T>> {
    match spec.rule {
        RuleSpec::Apriori => {
            let alpha = apriori_alpha(delta, &spec.class, spec.b)?;
            RegularizerConfig::new(spec.b, alpha, ChoiceRule::Apriori { delta, rho: spec.class.rho, p: spec.class.p })
        }
        RuleSpec::Aposteriori { xi, sigma } => morozov_select(h, delta, xi, spec.b, sigma),
    }
}

/// Error of one (source, data) pair; `None` when the discrepancy equation
/// has no solution for this data.
fn trial_error<T: Real>(
    spec: &OptimalitySpec<T>,
    solver: &QrmSolver<T>,
    f: &SpectralCoefficients<T>,
    h_delta: &SpectralCoefficients<T>,
    delta: T,
) -> Result<Option<(T, T)>> {
    let cfg = match choose(spec, h_delta, delta) {
        Ok(c) => c,
        Err(Error::NoSolution { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let rec = solver.invert(h_delta, cfg)?;
    Ok(Some((rec.solution.sub(f)?.l2_norm(), cfg.alpha)))
}

pub fn optimality_check<T: Real>(spec: &OptimalitySpec<T>) -> Result<OptimalityReport<T>> {
    spec.validate()?;
    let op = Arc::new(ForwardOperator::new(Arc::clone(&spec.domain), Arc::clone(&spec.profile))?);
    let solver = QrmSolver::new(Arc::clone(&op))?;
    let c = solver.lower_bound_constant();
    let two = T::lit(2.0);
    let (p, rho, b) = (spec.class.p, spec.class.rho, spec.b);
    let psi = op.psi_sup_norm();
    let r2 = psi.powf(-p / two) * rho;
    let mu = op.mu().to_vec();

    let error_constant = match spec.rule {
        RuleSpec::Apriori => c_apri1(p, b) + c.recip(),
        RuleSpec::Aposteriori { xi, .. } => {
            let k = solver.aposteriori_constants(xi, p, b);
            k.c_apost + k.c3
        }
    };
    let (inf_down, sup_down) = consecutive_ratio_range(&mu, p);
    let worst_multiplier = inf_down.min(sup_down.recip()).min(T::one());
    let upper_band = error_constant / (two * worst_multiplier * psi.powf(-p / (p + two)));
    let band = [T::lit(0.5), upper_band];

    let rows: Vec<Result<(OptimalityRow<T>, bool)>> = spec
        .deltas
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| {
            let q = ModulusQuery::new(r2, delta, p, mu.clone(), ModulusConvention::Centered)?;
            let bounds = modulus_bounds(&q)?;
            let mut embedding_ok = true;
            let mut worst = T::zero();

            // f = g* maximizing ||g|| over M_{r_2,p} with ||𝕋g|| ≤ δ, observed as h^δ = 0.
            let vertex = lp_vertex(&mu, p, r2, delta * delta);
            let mut g = vec![T::zero(); mu.len()];
            for (n, x) in &vertex.support {
                g[*n] = x.sqrt();
            }
            let g = SpectralCoefficients::new(Arc::clone(&spec.domain), g, FieldRole::Source)?;
            embedding_ok &= g.in_source_set(&spec.class);
            let zero = SpectralCoefficients::zeros(Arc::clone(&spec.domain), FieldRole::Observation);
            let mut alpha_at_vertex = T::nan();
            let vertex_data = match spec.rule {
                RuleSpec::Apriori => zero,
                // the discrepancy rule needs ||h^δ|| above its target; use the exact data plus noise
                RuleSpec::Aposteriori { .. } => {
                    let e = random_direction::<T>(mu.len(), &mut rng_from_seed(trial_seed(spec.seed, i, usize::MAX)));
                    add_noise_along(&op.apply_t(&g)?, delta, &e)?
                }
            };
            if let Some((err, alpha)) = trial_error(spec, &solver, &g, &vertex_data, delta)? {
                worst = worst.max(err);
                alpha_at_vertex = alpha;
            }

            for j in 0..spec.samples {
                let mut rng = rng_from_seed(trial_seed(spec.seed, i, j));
                let f = sample_source(Arc::clone(&spec.domain), &spec.class, &mut rng)?;
                embedding_ok &= f.in_source_set(&spec.class);
                let e = random_direction::<T>(mu.len(), &mut rng);
                let h_delta = add_noise_along(&op.apply_t(&f)?, delta, &e)?;
                if let Some((err, _)) = trial_error(spec, &solver, &f, &h_delta, delta)? {
                    worst = worst.max(err);
                }
            }
            // pairwise ω(2δ) = 2 s(δ)
            let omega_lower = two * bounds.lower;
            let row = OptimalityRow {
                delta,
                alpha_at_vertex,
                worst_error: worst,
                omega_lower,
                omega_upper: two * bounds.upper,
                sub_case: bounds.sub_case,
                ratio: worst / omega_lower,
            };
            Ok((row, embedding_ok))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let embedding_ok = rows.iter().all(|(_, ok)| *ok);
    let rows: Vec<OptimalityRow<T>> = rows.into_iter().map(|(r, _)| r).collect();
    let tol = T::tol(1e-12);
    let pass = embedding_ok
        && rows
            .iter()
            .all(|r| r.ratio.is_finite() && r.ratio >= band[0] * (T::one() - tol) && r.ratio <= band[1] * (T::one() + tol));
    Ok(OptimalityReport { r2, convention: ModulusConvention::Pairwise, error_constant, band, rows, embedding_ok, pass })
}
