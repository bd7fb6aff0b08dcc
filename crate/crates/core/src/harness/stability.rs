//! The conditional stability estimate
//! `||f|| ≤ C^{-p/(p+2)} ϱ^{2/(p+2)} ||𝕋 f||^{p/(p+2)}` on `S_{ϱ,p}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{SmoothnessClass, SpectralCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck<T> {
    pub source_norm: T,
    pub data_norm: T,
    pub bound: T,
    /// `bound - source_norm`.
    pub slack: T,
    pub holds: bool,
}

impl<T: Real> StabilityCheck<T> {
    /// Turns a failed check into a [`Error::TheoremViolation`] naming the triple.
    pub fn require(&self) -> Result<()> {
        if self.holds {
            Ok(())
        } else {
            Err(Error::TheoremViolation(format!(
                "conditional stability: ||f|| = {:e} exceeds {:e} for ||Tf|| = {:e}",
                self.source_norm, self.bound, self.data_norm
            )))
        }
    }
}

pub fn stability_bound<T: Real>(data_norm: T, class: &SmoothnessClass<T>, c: T) -> T {
    let two = T::lit(2.0);
    let p = class.p;
    c.powf(-p / (p + two)) * class.rho.powf(two / (p + two)) * data_norm.powf(p / (p + two))
}

/// Evaluates both sides for `f ∈ S_{ϱ,p}` and `h = 𝕋 f`.
pub fn conditional_stability_check<T: Real>(
    f: &SpectralCoefficients<T>,
    h: &SpectralCoefficients<T>,
    class: &SmoothnessClass<T>,
    c: T,
) -> Result<StabilityCheck<T>> {
    f.same_domain(h)?;
    if !f.in_source_set(class) {
        return Err(Error::InvalidArgument("source lies outside the smoothness class".into()));
    }
    let source_norm = f.l2_norm();
    let data_norm = h.l2_norm();
    let bound = stability_bound(data_norm, class, c);
    Ok(StabilityCheck {
        source_norm,
        data_norm,
        bound,
        slack: bound - source_norm,
        holds: source_norm <= bound * (T::one() + T::tol(1e-12)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::ForwardOperator;
    use crate::harness::noise::{rng_from_seed, sample_source};
    use crate::spectral::{FieldRole, SpectralDomain};
    use crate::temporal::{check_assumption, TemporalProfile};
    use std::sync::Arc;

    fn op() -> ForwardOperator<f64> {
        let d = Arc::new(SpectralDomain::<f64>::interval(1.0, 64).unwrap());
        let p = Arc::new(TemporalProfile::<f64>::constant(1.0, 1.0).unwrap());
        ForwardOperator::new(d, p).unwrap()
    }

    #[test]
    fn zero_source_is_on_the_boundary() {
        let op = op();
        let c = check_assumption(op.profile(), op.domain().first_eigenvalue()).unwrap().lower_bound.unwrap();
        let f = SpectralCoefficients::zeros(Arc::clone(op.domain()), FieldRole::Source);
        let r = conditional_stability_check(&f, &op.apply_t(&f).unwrap(), &SmoothnessClass::new(1.0, 1.0).unwrap(), c).unwrap();
        assert!(r.holds);
        assert_eq!(r.slack, 0.0);
    }

    #[test]
    fn single_mode_slack_in_closed_form() {
        let op = op();
        let c = check_assumption(op.profile(), op.domain().first_eigenvalue()).unwrap().lower_bound.unwrap();
        let (p, rho) = (2.0, 1.0);
        let lam = op.domain().first_eigenvalue();
        let f = SpectralCoefficients::unit(Arc::clone(op.domain()), 1, FieldRole::Source).unwrap().scaled(rho / lam.powf(p));
        let r = conditional_stability_check(&f, &op.apply_t(&f).unwrap(), &SmoothnessClass::new(p, rho).unwrap(), c).unwrap();
        let x = rho / lam.powf(p);
        let expected = c.powf(-0.5) * rho.powf(0.5) * (op.mu()[0] * x).powf(0.5);
        assert!((r.bound - expected).abs() < 1e-15 * expected);
        // constant ψ: C = λ_1² μ_1, so e_1 is an equality case
        let slack = x * ((lam * lam * op.mu()[0] / c).sqrt() - 1.0);
        assert!((r.slack - slack).abs() < 1e-14 * x);
        assert!(r.holds && r.slack.abs() < 1e-12 * x);
    }

    #[test]
    fn random_sources_satisfy_the_estimate() {
        let op = op();
        let c = check_assumption(op.profile(), op.domain().first_eigenvalue()).unwrap().lower_bound.unwrap();
        let class = SmoothnessClass::new(1.0, 2.0).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..100 {
            let f = sample_source(Arc::clone(op.domain()), &class, &mut rng).unwrap();
            conditional_stability_check(&f, &op.apply_t(&f).unwrap(), &class, c).unwrap().require().unwrap();
        }
    }
}
