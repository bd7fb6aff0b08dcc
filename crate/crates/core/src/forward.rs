//! The source-to-observation map `𝕋` and its quasi-reversible relatives.
//!
//! Everything is diagonal in the eigenbasis: `𝕋` multiplies coefficient `n`
//! by `μ_n`, `𝕋_α` by `(1 + αλ_n^b) μ_n`, and `𝔹_α` by `1 / (1 + αλ_n^b)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{FieldRole, SpectralCoefficients, SpectralDomain};
use crate::temporal::{mu_coefficient, mu_sequence, TemporalProfile};

/// Relative floor on `|μ_n| / max |μ|` below which the exact inverse refuses.
pub const ILL_CONDITIONING_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DiagonalKind<T> {
    Forward,
    QuasiReversible { alpha: T, b: T },
    Smoothing { alpha: T, b: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorDiagonal<T> {
    pub kind: DiagonalKind<T>,
    pub multipliers: Vec<T>,
}

impl<T: Real> OperatorDiagonal<T> {
    pub fn apply(&self, x: &SpectralCoefficients<T>, role: FieldRole) -> Result<SpectralCoefficients<T>> {
        if x.coeffs().len() != self.multipliers.len() {
            return Err(Error::Domain(format!(
                "operator has {} modes, field has {}",
                self.multipliers.len(),
                x.coeffs().len()
            )));
        }
        Ok(x.map_coeffs(role, |i, c| self.multipliers[i] * c))
    }
}

pub(crate) fn check_alpha_b<T: Real>(alpha: T, b: T) -> Result<()> {
    if !(alpha >= T::zero() && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha = {} must be nonnegative", alpha)));
    }
    if !(b >= T::lit(2.0) && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("order b = {} must be at least 2", b)));
    }
    Ok(())
}

/// `1 + α λ^b`.
pub(crate) fn qr_factor<T: Real>(alpha: T, lambda: T, b: T) -> T {
    T::one() + alpha * lambda.powf(b)
}

/// One row of the ill-posedness table: data `h̃_k = φ_k / λ_k` and the exact
/// preimage `f̃_k = 𝕋^{-1} h̃_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IllposednessRow<T> {
    pub k: usize,
    pub lambda: T,
    pub data_norm: T,
    pub preimage_norm: T,
    /// `||f̃_k|| ||ψ||_∞ / λ_k`, at least 1.
    pub growth_ratio: T,
}

/// `𝕋` for one domain and profile, with the `μ_n` cached.
#[derive(Debug, Clone)]
pub struct ForwardOperator<T> {
    domain: Arc<SpectralDomain<T>>,
    profile: Arc<TemporalProfile<T>>,
    mu: Vec<T>,
    max_abs_mu: T,
    psi_sup: T,
}

impl<T: Real> ForwardOperator<T> {
    pub fn new(domain: Arc<SpectralDomain<T>>, profile: Arc<TemporalProfile<T>>) -> Result<Self> {
        let seq = mu_sequence(&profile, &domain)?;
        let psi_sup = profile.sup_norm();
        Ok(Self { domain, profile, mu: seq.values, max_abs_mu: seq.max_abs, psi_sup })
    }

    pub fn domain(&self) -> &Arc<SpectralDomain<T>> {
        &self.domain
    }

    pub fn profile(&self) -> &Arc<TemporalProfile<T>> {
        &self.profile
    }

    /// `μ_1, …, μ_N` at `t = τ`.
    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn max_abs_mu(&self) -> T {
        self.max_abs_mu
    }

    pub fn psi_sup_norm(&self) -> T {
        self.psi_sup
    }

    /// Upper bound on the observation-norm contribution of modes beyond `N`
    /// for a source of L² norm `source_norm`.
    pub fn truncation_tail_bound(&self, source_norm: T) -> T {
        let lam = self.domain.last_eigenvalue();
        self.psi_sup * source_norm / (lam * lam)
    }

    fn check_field(&self, x: &SpectralCoefficients<T>) -> Result<()> {
        if Arc::ptr_eq(x.domain(), &self.domain) || **x.domain() == *self.domain {
            Ok(())
        } else {
            Err(Error::Domain("field and operator live on different domains".into()))
        }
    }

    pub fn diagonal(&self, kind: DiagonalKind<T>) -> Result<OperatorDiagonal<T>> {
        let lambdas = self.domain.modes().iter().map(|m| m.lambda);
        let multipliers = match kind {
            DiagonalKind::Forward => self.mu.clone(),
            DiagonalKind::QuasiReversible { alpha, b } => {
                check_alpha_b(alpha, b)?;
                lambdas.zip(&self.mu).map(|(l, mu)| qr_factor(alpha, l, b) * *mu).collect()
            }
            DiagonalKind::Smoothing { alpha, b } => {
                check_alpha_b(alpha, b)?;
                lambdas.map(|l| T::one() / qr_factor(alpha, l, b)).collect()
            }
        };
        Ok(OperatorDiagonal { kind, multipliers })
    }

    /// `h = 𝕋 f`.
    pub fn apply_t(&self, f: &SpectralCoefficients<T>) -> Result<SpectralCoefficients<T>> {
        self.check_field(f)?;
        Ok(f.map_coeffs(FieldRole::Observation, |i, c| self.mu[i] * c))
    }

    /// `𝕋_α f`.
    pub fn apply_t_alpha(&self, f: &SpectralCoefficients<T>, alpha: T, b: T) -> Result<SpectralCoefficients<T>> {
        self.check_field(f)?;
        self.diagonal(DiagonalKind::QuasiReversible { alpha, b })?.apply(f, FieldRole::Observation)
    }

    /// `𝔹_α h`.
    pub fn apply_b_alpha(&self, h: &SpectralCoefficients<T>, alpha: T, b: T) -> Result<SpectralCoefficients<T>> {
        self.check_field(h)?;
        self.diagonal(DiagonalKind::Smoothing { alpha, b })?.apply(h, h.role())
    }

    /// Smallest `|μ_n|` the exact inverse will divide by.
    pub fn ill_conditioning_threshold(&self) -> T {
        T::lit(ILL_CONDITIONING_FACTOR) * T::epsilon() * self.max_abs_mu
    }

    /// `f = Σ h_n / μ_n φ_n` on the truncated space.
    pub fn exact_inverse(&self, h: &SpectralCoefficients<T>) -> Result<SpectralCoefficients<T>> {
        self.check_field(h)?;
        let threshold = self.ill_conditioning_threshold();
        if let Some((i, mu)) = self.mu.iter().enumerate().find(|(_, mu)| !(mu.abs() >= threshold)) {
            return Err(Error::IllConditioned { index: i + 1, value: mu.as_f64(), threshold: threshold.as_f64() });
        }
        Ok(h.map_coeffs(FieldRole::Reconstruction, |i, c| c / self.mu[i]))
    }

    /// Coefficients of `v(t) = Σ (1 + αλ_n^b) μ_n(t) f_n φ_n` at each time in `times`.
    /// With `α = 0` this is the mild solution of the unregularized system.
    pub fn mild_solution(&self, f: &SpectralCoefficients<T>, times: &[T], alpha: T, b: T) -> Result<Vec<SpectralCoefficients<T>>> {
        self.check_field(f)?;
        check_alpha_b(alpha, b)?;
        if alpha > T::zero() && !f.hp_norm(b - T::lit(2.0))?.is_finite() {
            return Err(Error::Range("source is not in H_{b-2} at truncation scale".into()));
        }
        let modes = self.domain.modes();
        times
            .iter()
            .map(|&t| {
                let coeffs = modes
                    .par_iter()
                    .zip(f.coeffs().par_iter())
                    .map(|(m, c)| {
                        if *c == T::zero() {
                            return Ok(T::zero());
                        }
                        let mu_t = mu_coefficient(&self.profile, m.lambda, t)?;
                        Ok(qr_factor(alpha, m.lambda, b) * mu_t * *c)
                    })
                    .collect::<Result<Vec<T>>>()?;
                SpectralCoefficients::new(Arc::clone(&self.domain), coeffs, FieldRole::Observation)
            })
            .collect()
    }

    /// Rows `k = 1..=k_max` of `(k, ||h̃_k||, ||𝕋^{-1} h̃_k||)` with `h̃_k = φ_k / λ_k`.
    pub fn illposedness_demo(&self, k_max: usize) -> Result<Vec<IllposednessRow<T>>> {
        if k_max == 0 || k_max > self.domain.len() {
            return Err(Error::InvalidArgument(format!("k_max = {} outside 1..={}", k_max, self.domain.len())));
        }
        (1..=k_max)
            .map(|k| {
                let lambda = self.domain.eigenvalue(k)?;
                let h = SpectralCoefficients::unit(Arc::clone(&self.domain), k, FieldRole::Observation)?.scaled(T::one() / lambda);
                let f = self.exact_inverse(&h)?;
                let preimage_norm = f.l2_norm();
                Ok(IllposednessRow {
                    k,
                    lambda,
                    data_norm: h.l2_norm(),
                    preimage_norm,
                    growth_ratio: preimage_norm * self.psi_sup / lambda,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(n: usize) -> ForwardOperator<f64> {
        let d = Arc::new(SpectralDomain::<f64>::interval(1.0, n).unwrap());
        let p = Arc::new(TemporalProfile::<f64>::constant(1.0, 1.0).unwrap());
        ForwardOperator::new(d, p).unwrap()
    }

    #[test]
    fn apply_t_on_first_mode() {
        let op = setup(16);
        let e1 = SpectralCoefficients::unit(Arc::clone(op.domain()), 1, FieldRole::Source).unwrap();
        let h = op.apply_t(&e1).unwrap();
        let lam = PI * PI;
        let mu1 = (1.0 - (1.0 + lam) * (-lam).exp()) / (lam * lam);
        assert!((h.coeffs()[0] - mu1).abs() < 1e-16);
        assert!(h.coeffs()[1..].iter().all(|c| *c == 0.0));
        assert_eq!(h.role(), FieldRole::Observation);
        let zero = SpectralCoefficients::zeros(Arc::clone(op.domain()), FieldRole::Source);
        assert_eq!(op.apply_t(&zero).unwrap().l2_norm(), 0.0);
    }

    #[test]
    fn diagonality_on_every_unit_vector() {
        let op = setup(32);
        for n in 1..=32 {
            let e = SpectralCoefficients::unit(Arc::clone(op.domain()), n, FieldRole::Source).unwrap();
            let h = op.apply_t(&e).unwrap();
            for (i, c) in h.coeffs().iter().enumerate() {
                assert_eq!(*c, if i + 1 == n { op.mu()[n - 1] } else { 0.0 });
            }
        }
    }

    #[test]
    fn smoothing_on_first_mode() {
        let op = setup(8);
        let e1 = SpectralCoefficients::unit(Arc::clone(op.domain()), 1, FieldRole::Observation).unwrap();
        let b = op.apply_b_alpha(&e1, 1.0, 2.0).unwrap();
        assert!((b.coeffs()[0] - 1.0 / (1.0 + PI.powi(4))).abs() < 1e-17);
        let id = op.apply_b_alpha(&e1, 0.0, 2.0).unwrap();
        assert_eq!(id, e1);
        assert!(op.apply_b_alpha(&e1, 1.0, 1.5).is_err());
        assert!(op.apply_b_alpha(&e1, -1.0, 2.0).is_err());
    }

    #[test]
    fn zero_alpha_reduces_to_forward() {
        let op = setup(8);
        let f = SpectralCoefficients::new(Arc::clone(op.domain()), (1..=8).map(|k| 1.0 / k as f64).collect(), FieldRole::Source).unwrap();
        assert_eq!(op.apply_t_alpha(&f, 0.0, 3.0).unwrap(), op.apply_t(&f).unwrap());
    }

    #[test]
    fn exact_inverse_round_trip_and_threshold() {
        let op = setup(64);
        let f = SpectralCoefficients::new(Arc::clone(op.domain()), (1..=64).map(|k| (k as f64).sin()).collect(), FieldRole::Source).unwrap();
        let back = op.exact_inverse(&op.apply_t(&f).unwrap()).unwrap();
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
        // a profile whose μ_n collapse relative to μ_1 trips the guard
        let d = Arc::new(SpectralDomain::<f64>::interval(1.0, 4000).unwrap());
        let p = Arc::new(TemporalProfile::<f64>::constant(1.0, 1.0).unwrap());
        let big = ForwardOperator::new(d, p).unwrap();
        let h = SpectralCoefficients::zeros(Arc::clone(big.domain()), FieldRole::Observation);
        match big.exact_inverse(&h) {
            Err(Error::IllConditioned { index, .. }) => assert!(index > 1000),
            other => panic!("expected ill-conditioning, got {other:?}"),
        }
    }

    #[test]
    fn mild_solution_endpoints() {
        let op = setup(8);
        let e1 = SpectralCoefficients::unit(Arc::clone(op.domain()), 1, FieldRole::Source).unwrap();
        let snaps = op.mild_solution(&e1, &[0.0, 0.5, 1.0], 1.0, 2.0).unwrap();
        assert_eq!(snaps[0].l2_norm(), 0.0);
        let lam = PI * PI;
        let expected = (1.0 + lam * lam) * op.mu()[0];
        assert!((snaps[2].coeffs()[0] - expected).abs() <= 1e-12 * expected);
        let direct = op.apply_t_alpha(&e1, 1.0, 2.0).unwrap();
        assert!((snaps[2].coeffs()[0] - direct.coeffs()[0]).abs() <= 1e-12 * expected);
    }

    #[test]
    fn illposedness_rows() {
        let op = setup(64);
        let rows = op.illposedness_demo(64).unwrap();
        assert!((rows[0].data_norm - 1.0 / (PI * PI)).abs() < 1e-16);
        for w in rows.windows(2) {
            assert!(w[1].preimage_norm > w[0].preimage_norm);
            assert!(w[1].data_norm < w[0].data_norm);
        }
        assert!(rows.iter().all(|r| r.growth_ratio >= 1.0 - 1e-14));
    }
}
