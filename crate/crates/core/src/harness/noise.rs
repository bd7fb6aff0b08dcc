//! Seeded noise and source sampling.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{l2_norm, Real};
use crate::spectral::{FieldRole, SmoothnessClass, SpectralCoefficients, SpectralDomain};

/// Deterministic generator for `seed`.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent per-trial seed derived from an experiment seed.
pub fn trial_seed(seed: u64, delta_index: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ delta_index as u64) ^ trial as u64)
}

/// Unit vector of length `n` drawn uniformly from the sphere.
pub fn random_direction<T: Real>(n: usize, rng: &mut impl Rng) -> Vec<T> {
    loop {
        let e: Vec<T> = (0..n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
        let norm = l2_norm(&e);
        if norm > T::zero() {
            return e.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `h^δ = h + δ e` with `e` a seeded unit direction, so `||h^δ - h|| = δ`.
pub fn add_noise<T: Real>(h: &SpectralCoefficients<T>, delta: T, seed: u64) -> Result<SpectralCoefficients<T>> {
    let e = random_direction::<T>(h.coeffs().len(), &mut rng_from_seed(seed));
    add_noise_along(h, delta, &e)
}

/// `h + δ e` for a given unit direction `e`.
pub fn add_noise_along<T: Real>(h: &SpectralCoefficients<T>, delta: T, e: &[T]) -> Result<SpectralCoefficients<T>> {
    if !(delta >= T::zero() && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level delta = {} must be nonnegative", delta)));
    }
    if e.len() != h.coeffs().len() {
        return Err(Error::Domain("noise direction has the wrong length".into()));
    }
    Ok(h.map_coeffs(FieldRole::Observation, |i, c| c + delta * e[i]))
}

/// `c_n = ϱ λ_n^{-p-q} / ||λ^{-p-q}||_{H_p}`, on the boundary of `S_{ϱ,p}`
/// at truncation scale.
pub fn decay_law_source<T: Real>(domain: Arc<SpectralDomain<T>>, class: &SmoothnessClass<T>, q: T) -> Result<SpectralCoefficients<T>> {
    if !(q > T::zero() && q.is_finite()) {
        return Err(Error::InvalidArgument(format!("decay offset q = {} must be positive", q)));
    }
    let raw: Vec<T> = domain.modes().iter().map(|m| m.lambda.powf(-class.p - q)).collect();
    let f = SpectralCoefficients::new(domain, raw, FieldRole::Source)?;
    let norm = f.hp_norm(class.p)?;
    Ok(f.scaled(class.rho / norm))
}

/// A random element of `S_{ϱ,p}`: Gaussian coefficients with a random
/// extra decay in `[0, 1]`, scaled to `H_p` norm `ϱ u` with `u` uniform in `(0, 1]`.
pub fn sample_source<T: Real>(domain: Arc<SpectralDomain<T>>, class: &SmoothnessClass<T>, rng: &mut impl Rng) -> Result<SpectralCoefficients<T>> {
    let extra = T::lit(rng.random::<f64>());
    let z = random_direction::<T>(domain.len(), rng);
    let raw: Vec<T> = domain.modes().iter().zip(z).map(|(m, z)| z * m.lambda.powf(-class.p - extra)).collect();
    let f = SpectralCoefficients::new(domain, raw, FieldRole::Source)?;
    let norm = f.hp_norm(class.p)?;
    let u = T::lit(1.0 - rng.random::<f64>());
    Ok(f.scaled(class.rho * u / norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom() -> Arc<SpectralDomain<f64>> {
        Arc::new(SpectralDomain::<f64>::interval(1.0, 64).unwrap())
    }

    #[test]
    fn zero_noise_is_identity() {
        let h = SpectralCoefficients::new(dom(), (0..64).map(|i| (i as f64).cos()).collect(), FieldRole::Observation).unwrap();
        assert_eq!(add_noise(&h, 0.0, 7).unwrap(), h);
    }

    #[test]
    fn noise_has_exact_norm_and_depends_on_seed() {
        let h = SpectralCoefficients::new(dom(), (0..64).map(|i| (i as f64 * 0.37).sin()).collect(), FieldRole::Observation).unwrap();
        let a = add_noise(&h, 0.25, 1).unwrap();
        let b = add_noise(&h, 0.25, 2).unwrap();
        assert!((a.sub(&h).unwrap().l2_norm() - 0.25).abs() < 1e-14);
        assert!((b.sub(&h).unwrap().l2_norm() - 0.25).abs() < 1e-14);
        assert_ne!(a, b);
        assert_eq!(a, add_noise(&h, 0.25, 1).unwrap());
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for d in 0..10 {
            for t in 0..10 {
                assert!(seen.insert(trial_seed(42, d, t)));
            }
        }
    }

    #[test]
    fn decay_source_sits_on_the_class_boundary() {
        let class = SmoothnessClass::new(2.0, 3.0).unwrap();
        let f = decay_law_source(dom(), &class, 0.5).unwrap();
        assert!((f.hp_norm(2.0).unwrap() - 3.0).abs() < 1e-13);
        assert!(f.in_source_set(&class));
    }

    #[test]
    fn samples_stay_in_class() {
        let class = SmoothnessClass::new(1.5, 0.7).unwrap();
        let mut rng = rng_from_seed(9);
        for _ in 0..50 {
            assert!(sample_source(dom(), &class, &mut rng).unwrap().in_source_set(&class));
        }
    }
}
