//! Dirichlet eigen-structure of `-Δ` on boxes and functions stored by their
//! expansion coefficients.
//!
//! On `Ω = (0, L_1) × … × (0, L_d)` the eigenpairs are
//! `φ_k(x) = Π_i sqrt(2/L_i) sin(k_i π x_i / L_i)` with
//! `λ_k = π² Σ_i (k_i / L_i)²`. The `N` smallest are kept, sorted by value
//! with ties broken by lexicographic multi-index.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{l2_norm, Real};

/// Default truncation level for interval domains.
pub const DEFAULT_MODES_1D: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T> {
    pub lambda: T,
    pub multi_index: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDomain<T> {
    sides: Vec<T>,
    modes: Vec<Mode<T>>,
}

impl<T: Real> SpectralDomain<T> {
    pub fn interval(length: T, modes: usize) -> Result<Self> {
        Self::new(vec![length], modes)
    }

    pub fn new(sides: Vec<T>, modes: usize) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if sides.iter().any(|l| !(l.is_finite() && *l > T::zero())) {
            return Err(Error::Domain("side lengths must be positive and finite".into()));
        }
        if modes == 0 {
            return Err(Error::Domain("truncation level must be positive".into()));
        }
        let modes = if sides.len() == 1 {
            let pl = T::PI() / sides[0];
            (1..=modes)
                .map(|n| {
                    let k = T::from_index(n) * pl;
                    Mode { lambda: k * k, multi_index: vec![n] }
                })
                .collect()
        } else {
            lowest_box_modes(&sides, modes)
        };
        Ok(Self { sides, modes })
    }

    pub fn dimension(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[T] {
        &self.sides
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode<T>] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    /// `λ_n` for the 1-based index `n`.
    pub fn eigenvalue(&self, n: usize) -> Result<T> {
        if n == 0 || n > self.modes.len() {
            return Err(Error::Domain(format!("eigenvalue index {} outside 1..={}", n, self.modes.len())));
        }
        Ok(self.modes[n - 1].lambda)
    }

    pub fn first_eigenvalue(&self) -> T {
        self.modes[0].lambda
    }

    pub fn last_eigenvalue(&self) -> T {
        self.modes[self.modes.len() - 1].lambda
    }

    /// `φ_n(x)` for the 0-based mode position `n`; exactly zero on the boundary.
    pub fn eigenfunction(&self, n: usize, x: &[T]) -> Result<T> {
        self.check_point(x)?;
        Ok(self.eigenfunction_unchecked(n, x))
    }

    fn eigenfunction_unchecked(&self, n: usize, x: &[T]) -> T {
        let two = T::lit(2.0);
        let mode = &self.modes[n];
        let mut v = T::one();
        for ((k, xi), li) in mode.multi_index.iter().zip(x).zip(&self.sides) {
            if *xi == T::zero() || *xi == *li {
                return T::zero();
            }
            v *= (two / *li).sqrt() * (T::from_index(*k) * T::PI() * *xi / *li).sin();
        }
        v
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::Domain(format!("point has {} coordinates, domain has dimension {}", x.len(), self.dimension())));
        }
        for (xi, li) in x.iter().zip(&self.sides) {
            if !(*xi >= T::zero() && *xi <= *li) {
                return Err(Error::Domain(format!("point coordinate {} outside [0, {}]", xi, li)));
            }
        }
        Ok(())
    }
}

fn lowest_box_modes<T: Real>(sides: &[T], n: usize) -> Vec<Mode<T>> {
    let d = sides.len();
    let inv_sq: Vec<T> = sides.iter().map(|l| T::one() / (*l * *l)).collect();
    let pi2 = T::PI() * T::PI();
    let lambda_of = |k: &[usize]| -> T {
        let s: T = k.iter().zip(&inv_sq).map(|(ki, w)| T::from_index(ki * ki) * *w).sum();
        pi2 * s
    };
    let mut bound = ((n as f64).powf(1.0 / d as f64).ceil() as usize).max(1) + 1;
    loop {
        let mut all = Vec::new();
        let mut idx = vec![1usize; d];
        'enumerate: loop {
            all.push(Mode { lambda: lambda_of(&idx), multi_index: idx.clone() });
            let mut axis = d;
            while axis > 0 {
                axis -= 1;
                if idx[axis] < bound {
                    idx[axis] += 1;
                    for later in idx.iter_mut().skip(axis + 1) {
                        *later = 1;
                    }
                    continue 'enumerate;
                }
            }
            break;
        }
        all.sort_by(|a, b| {
            a.lambda
                .partial_cmp(&b.lambda)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.multi_index.cmp(&b.multi_index))
        });
        if all.len() >= n {
            let cutoff = all[n - 1].lambda;
            // Any index outside the enumerated cube has some k_i > bound.
            let complete = (0..d).all(|i| {
                let mut k = vec![1usize; d];
                k[i] = bound + 1;
                lambda_of(&k) > cutoff
            });
            if complete {
                all.truncate(n);
                return all;
            }
        }
        bound *= 2;
    }
}

/// What a coefficient vector stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    Source,
    Observation,
    Reconstruction,
}

/// A function on the domain, stored by its first `N` coefficients against
/// the orthonormal eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients<T> {
    domain: Arc<SpectralDomain<T>>,
    coeffs: Vec<T>,
    role: FieldRole,
}

impl<T: Real> SpectralCoefficients<T> {
    pub fn new(domain: Arc<SpectralDomain<T>>, coeffs: Vec<T>, role: FieldRole) -> Result<Self> {
        if coeffs.len() != domain.len() {
            return Err(Error::Domain(format!("{} coefficients given for a domain with {} modes", coeffs.len(), domain.len())));
        }
        Ok(Self { domain, coeffs, role })
    }

    pub fn zeros(domain: Arc<SpectralDomain<T>>, role: FieldRole) -> Self {
        let n = domain.len();
        Self { domain, coeffs: vec![T::zero(); n], role }
    }

    /// The `n`-th unit vector (1-based).
    pub fn unit(domain: Arc<SpectralDomain<T>>, n: usize, role: FieldRole) -> Result<Self> {
        if n == 0 || n > domain.len() {
            return Err(Error::Domain(format!("unit index {} outside 1..={}", n, domain.len())));
        }
        let mut v = Self::zeros(domain, role);
        v.coeffs[n - 1] = T::one();
        Ok(v)
    }

    pub fn domain(&self) -> &Arc<SpectralDomain<T>> {
        &self.domain
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn with_role(mut self, role: FieldRole) -> Self {
        self.role = role;
        self
    }

    /// Same domain, new coefficients of equal length.
    pub fn map_coeffs(&self, role: FieldRole, f: impl Fn(usize, T) -> T) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| f(i, *c)).collect();
        Self { domain: Arc::clone(&self.domain), coeffs, role }
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map_coeffs(self.role, |_, c| c * s)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_domain(other)?;
        Ok(self.map_coeffs(self.role, |i, c| c - other.coeffs[i]))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_domain(other)?;
        Ok(self.map_coeffs(self.role, |i, c| c + other.coeffs[i]))
    }

    pub fn same_domain(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain {
            Ok(())
        } else {
            Err(Error::Domain("coefficient vectors live on different domains".into()))
        }
    }

    /// L² norm, equal to the Euclidean norm of the coefficients.
    pub fn l2_norm(&self) -> T {
        l2_norm(&self.coeffs)
    }

    /// `(Σ λ_n^{2p} c_n²)^{1/2}`.
    pub fn hp_norm(&self, p: T) -> Result<T> {
        if !(p >= T::zero()) {
            return Err(Error::InvalidArgument(format!("smoothness exponent p = {} must be nonnegative", p)));
        }
        if p == T::zero() {
            return Ok(self.l2_norm());
        }
        let weighted: Vec<T> = self
            .coeffs
            .iter()
            .zip(self.domain.modes())
            .map(|(c, m)| *c * m.lambda.powf(p))
            .collect();
        let norm = l2_norm(&weighted);
        if norm.is_finite() {
            Ok(norm)
        } else {
            Err(Error::Range(format!("H_{} norm overflows", p)))
        }
    }

    /// Membership in `{g : ||g||_{H_p} ≤ ϱ}` with relative slack 1e-12.
    pub fn in_source_set(&self, class: &SmoothnessClass<T>) -> bool {
        match self.hp_norm(class.p) {
            Ok(norm) => norm <= class.rho * (T::one() + T::tol(1e-12)),
            Err(_) => false,
        }
    }

    /// `Σ c_n φ_n(x)`.
    pub fn evaluate_pointwise(&self, x: &[T]) -> Result<T> {
        self.domain.check_point(x)?;
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != T::zero())
            .map(|(n, c)| *c * self.domain.eigenfunction_unchecked(n, x))
            .sum())
    }
}

/// Ball of radius `rho` in the Hilbert scale of order `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessClass<T> {
    pub p: T,
    pub rho: T,
}

impl<T: Real> SmoothnessClass<T> {
    pub fn new(p: T, rho: T) -> Result<Self> {
        if !(p >= T::zero() && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("smoothness exponent p = {} must be nonnegative", p)));
        }
        if !(rho > T::zero() && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius rho = {} must be positive", rho)));
        }
        Ok(Self { p, rho })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_interval(n: usize) -> Arc<SpectralDomain<f64>> {
        Arc::new(SpectralDomain::interval(1.0, n).unwrap())
    }

    #[test]
    fn interval_eigenvalues_closed_form() {
        let d = unit_interval(8);
        assert_eq!(d.eigenvalue(1).unwrap(), PI * PI);
        assert!((d.eigenvalue(3).unwrap() - 9.0 * PI * PI).abs() < 1e-12);
        assert!(matches!(d.eigenvalue(0), Err(Error::Domain(_))));
        assert!(matches!(d.eigenvalue(9), Err(Error::Domain(_))));
    }

    #[test]
    fn square_ordering_and_ties() {
        let d = SpectralDomain::new(vec![1.0_f64, 1.0], 6).unwrap();
        assert!((d.eigenvalue(1).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        let idx: Vec<Vec<usize>> = d.modes().iter().map(|m| m.multi_index.clone()).collect();
        assert_eq!(idx, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2], vec![1, 3], vec![3, 1]]);
    }

    #[test]
    fn rectangle_enumeration_is_complete() {
        // Long thin box: many modes along the long side come first.
        let d = SpectralDomain::new(vec![10.0_f64, 1.0], 30).unwrap();
        let mut brute = Vec::new();
        for k1 in 1..200usize {
            for k2 in 1..10usize {
                brute.push(PI * PI * ((k1 * k1) as f64 / 100.0 + (k2 * k2) as f64));
            }
        }
        brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (m, b) in d.modes().iter().zip(&brute) {
            assert!((m.lambda - b).abs() < 1e-9 * b);
        }
    }

    #[test]
    fn hp_norm_examples() {
        let d = unit_interval(16);
        let e1 = SpectralCoefficients::unit(Arc::clone(&d), 1, FieldRole::Source).unwrap();
        assert_eq!(e1.hp_norm(0.0).unwrap(), 1.0);
        assert!((e1.hp_norm(1.0).unwrap() - PI * PI).abs() < 1e-12);
        let mut c = vec![0.0; 16];
        c[0] = 1.0;
        c[1] = 1.0;
        let v = SpectralCoefficients::new(d, c, FieldRole::Source).unwrap();
        // direct summation: λ_1 + λ_2 = π² + 4π²
        let oracle = (PI * PI * 1.0 + PI * PI * 4.0).sqrt();
        assert!((v.hp_norm(0.5).unwrap() - oracle).abs() < 1e-12 * oracle);
        assert!(v.hp_norm(-1.0).is_err());
    }

    #[test]
    fn source_set_boundary() {
        let d = unit_interval(16);
        let cls = SmoothnessClass::new(1.0, PI * PI).unwrap();
        assert!(SpectralCoefficients::zeros(Arc::clone(&d), FieldRole::Source).in_source_set(&cls));
        let e1 = SpectralCoefficients::unit(Arc::clone(&d), 1, FieldRole::Source).unwrap();
        assert!(e1.in_source_set(&cls));
        assert!(!e1.scaled(2.0).in_source_set(&cls));
        assert!(SmoothnessClass::new(-1.0, 1.0).is_err());
        assert!(SmoothnessClass::new(1.0, 0.0).is_err());
    }

    #[test]
    fn pointwise_evaluation() {
        let d = unit_interval(4);
        let e1 = SpectralCoefficients::unit(Arc::clone(&d), 1, FieldRole::Source).unwrap();
        assert!((e1.evaluate_pointwise(&[0.5]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(e1.evaluate_pointwise(&[0.0]).unwrap(), 0.0);
        assert_eq!(e1.evaluate_pointwise(&[1.0]).unwrap(), 0.0);
        assert!(e1.evaluate_pointwise(&[1.5]).is_err());
        let v = SpectralCoefficients::new(Arc::clone(&d), vec![1.0, 1.0, 0.0, 0.0], FieldRole::Source).unwrap();
        let oracle = 2f64.sqrt() * ((PI / 4.0).sin() + (PI / 2.0).sin());
        assert!((v.evaluate_pointwise(&[0.25]).unwrap() - oracle).abs() < 1e-14);

        let sq = Arc::new(SpectralDomain::new(vec![1.0_f64, 2.0], 5).unwrap());
        let all = SpectralCoefficients::new(Arc::clone(&sq), vec![1.0; 5], FieldRole::Source).unwrap();
        assert_eq!(all.evaluate_pointwise(&[0.3, 2.0]).unwrap(), 0.0);
        assert!(all.evaluate_pointwise(&[0.3]).is_err());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let d = unit_interval(4);
        assert!(SpectralCoefficients::new(d, vec![1.0; 3], FieldRole::Source).is_err());
    }
}
