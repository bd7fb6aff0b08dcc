//! Growth of the Dirichlet eigenvalues: `e_1 n^{2/d} ≤ λ_n ≤ e_2 n^{2/d}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::SpectralDomain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylReport<T> {
    pub dimension: usize,
    pub modes: usize,
    /// `min_n λ_n / n^{2/d}` over the truncation.
    pub e1: T,
    /// `max_n λ_n / n^{2/d}`.
    pub e2: T,
    pub min_consecutive_ratio: T,
    pub max_consecutive_ratio: T,
    /// `(e_1/e_2) (1/2)^{2/d}`.
    pub ratio_floor: T,
    pub pass: bool,
}

pub fn weyl_ratio_check<T: Real>(domain: &SpectralDomain<T>) -> Result<WeylReport<T>> {
    let d = domain.dimension();
    if !(1..=2).contains(&d) {
        return Err(Error::InvalidArgument(format!("the eigenvalue band check covers d = 1, 2; got d = {}", d)));
    }
    if domain.len() < 2 {
        return Err(Error::InvalidArgument("at least two modes are required".into()));
    }
    let lam = domain.eigenvalues();
    let expo = T::lit(2.0) / T::from_index(d);
    let scaled: Vec<T> = lam.iter().enumerate().map(|(i, l)| *l / T::from_index(i + 1).powf(expo)).collect();
    let e1 = scaled.iter().fold(T::infinity(), |m, x| m.min(*x));
    let e2 = scaled.iter().fold(T::zero(), |m, x| m.max(*x));
    let ratios: Vec<T> = lam.windows(2).map(|w| w[0] / w[1]).collect();
    let min_r = ratios.iter().fold(T::infinity(), |m, x| m.min(*x));
    let max_r = ratios.iter().fold(T::zero(), |m, x| m.max(*x));
    let ratio_floor = (e1 / e2) * T::lit(0.5).powf(expo);
    let tol = T::one() - T::tol(1e-12);
    let pass = e1 > T::zero() && min_r >= ratio_floor * tol && max_r <= (e2 / e1) / tol;
    Ok(WeylReport {
        dimension: d,
        modes: domain.len(),
        e1,
        e2,
        min_consecutive_ratio: min_r,
        max_consecutive_ratio: max_r,
        ratio_floor,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_is_exactly_pi_squared() {
        let rep = weyl_ratio_check(&SpectralDomain::<f64>::interval(1.0, 200).unwrap()).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((rep.e1 - pi2).abs() < 1e-12 * pi2);
        assert!((rep.e2 - pi2).abs() < 1e-12 * pi2);
        assert!(rep.min_consecutive_ratio >= 0.25);
        assert!(rep.pass);
    }

    #[test]
    fn rectangle_band() {
        let dom = SpectralDomain::<f64>::new(vec![1.0, 2.0], 300).unwrap();
        let rep = weyl_ratio_check(&dom).unwrap();
        assert!(rep.e1 > 0.0 && rep.e2 < 10.0 * rep.e1);
        assert!(rep.pass, "{:?}", rep);
    }
}
