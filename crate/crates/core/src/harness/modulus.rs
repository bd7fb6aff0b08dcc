//! Modulus of continuity of `𝕋` on `M_{r,p} = {g : ||g̃|| ≤ r, g = |𝕋|^{p/2} g̃}`.
//!
//! In coefficients, `g ∈ M_{r,p}` iff `Σ |μ_n|^{-p} g_n² ≤ r²`. Two conventions
//! are supported: the centered one `s(δ) = sup{||g|| : g ∈ M, ||𝕋g|| ≤ δ}`,
//! for which the closed form `r^{2/(p+2)} δ^{p/(p+2)}` is exact at spectral
//! points, and the pairwise one `ω(δ) = sup{||g_1 - g_2|| : ||𝕋(g_1 - g_2)|| ≤ δ}`,
//! which equals `2 s(δ/2)` because `M` is convex and symmetric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest mode count the brute-force oracle accepts.
pub const ORACLE_MAX_MODES: usize = 16;
/// Relative slack for spectral membership of `δ²/r²`.
pub const MEMBERSHIP_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusConvention {
    Centered,
    Pairwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusQuery<T> {
    pub r: T,
    pub delta: T,
    pub p: T,
    pub mu: Vec<T>,
    pub convention: ModulusConvention,
}

/// Which branch of the two-sided estimate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "case", content = "index")]
pub enum SubCase {
    /// `δ²/r² = |μ_n|^{p+2}`.
    Membership(usize),
    /// `|μ_n|^{p+2} < δ²/r² < |μ_{n+1}|^{p+2}`.
    Rising(usize),
    /// `|μ_{n+1}|^{p+2} < δ²/r² < |μ_n|^{p+2}`.
    Falling(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusBounds<T> {
    pub lower: T,
    pub upper: T,
    /// `r^{2/(p+2)} δ^{p/(p+2)}` in the query's convention.
    pub base: T,
    pub sub_case: SubCase,
}

/// An optimal vertex of the two-constraint program, as squared coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpVertex<T> {
    pub support: Vec<(usize, T)>,
    pub value: T,
}

impl<T: Real> ModulusQuery<T> {
    pub fn new(r: T, delta: T, p: T, mu: Vec<T>, convention: ModulusConvention) -> Result<Self> {
        if !(r > T::zero() && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius r = {} must be positive", r)));
        }
        if !(delta >= T::zero() && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta = {} must be nonnegative", delta)));
        }
        if !(p > T::zero() && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p = {} must be positive", p)));
        }
        if mu.is_empty() || mu.iter().any(|m| !(m.abs() > T::zero() && m.is_finite())) {
            return Err(Error::InvalidArgument("mu must be a nonempty sequence of nonzero finite values".into()));
        }
        Ok(Self { r, delta, p, mu, convention })
    }

    pub fn with_delta(&self, delta: T) -> Result<Self> {
        Self::new(self.r, delta, self.p, self.mu.clone(), self.convention)
    }

    /// Noise level seen by the centered problem and the factor applied to its value.
    fn centered_delta(&self) -> (T, T) {
        match self.convention {
            ModulusConvention::Centered => (self.delta, T::one()),
            ModulusConvention::Pairwise => {
                let two = T::lit(2.0);
                (self.delta / two, two)
            }
        }
    }

    /// The spectral point `|μ_n|^{p+2}` matching the centered `δ²/r²`, if any.
    pub fn spectrum_membership(&self) -> Option<usize> {
        let (d, _) = self.centered_delta();
        let t = (d / self.r).powi(2);
        let tol = T::tol(MEMBERSHIP_REL_TOL);
        self.mu.iter().position(|m| {
            let s = m.abs().powf(self.p + T::lit(2.0));
            (t - s).abs() <= tol * s
        })
    }

    /// `r · max |μ_n|^{(p+2)/2}` in the query's convention.
    pub fn delta_0(&self) -> T {
        let (_, factor) = self.centered_delta();
        let top = self.mu.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        factor * self.r * top.powf((self.p + T::lit(2.0)) / T::lit(2.0))
    }

    fn base(&self) -> T {
        let (d, factor) = self.centered_delta();
        let two = T::lit(2.0);
        factor * self.r.powf(two / (self.p + two)) * d.powf(self.p / (self.p + two))
    }
}

/// `r^{2/(p+2)} δ^{p/(p+2)}` (times the convention factor), valid when `δ²/r²` is spectral.
pub fn modulus_closed_form<T: Real>(q: &ModulusQuery<T>) -> Result<T> {
    if q.delta == T::zero() {
        return Ok(T::zero());
    }
    match q.spectrum_membership() {
        Some(_) => Ok(q.base()),
        None => Err(Error::InvalidArgument(format!(
            "delta^2/r^2 = {:e} is not of the form |mu_n|^(p+2); use modulus_bounds instead",
            (q.centered_delta().0 / q.r).powi(2)
        ))),
    }
}

/// `inf_n` and `sup_n` of `(|μ_n|/|μ_{n+1}|)^{p/2}` over the truncation.
pub fn consecutive_ratio_range<T: Real>(mu: &[T], p: T) -> (T, T) {
    let half = p / T::lit(2.0);
    mu.windows(2).fold((T::infinity(), T::zero()), |(lo, hi), w| {
        let r = (w[0].abs() / w[1].abs()).powf(half);
        (lo.min(r), hi.max(r))
    })
}

/// Two-sided estimate for `δ²/r²` off the spectrum, `0 < δ ≤ δ_0`.
pub fn modulus_bounds<T: Real>(q: &ModulusQuery<T>) -> Result<ModulusBounds<T>> {
    if !(q.delta > T::zero()) {
        return Err(Error::InvalidArgument("the two-sided estimate needs delta > 0".into()));
    }
    let d0 = q.delta_0();
    if q.delta > d0 {
        return Err(Error::Range(format!("delta = {:e} exceeds delta_0 = {:e}", q.delta, d0)));
    }
    let base = q.base();
    if let Some(n) = q.spectrum_membership() {
        return Ok(ModulusBounds { lower: base, upper: base, base, sub_case: SubCase::Membership(n) });
    }
    if q.mu.len() < 2 {
        return Err(Error::Range("at least two modes are needed to bracket delta".into()));
    }
    let (d, _) = q.centered_delta();
    let t = (d / q.r).powi(2);
    let pw = q.p + T::lit(2.0);
    let sub_case = q
        .mu
        .windows(2)
        .enumerate()
        .find_map(|(n, w)| {
            let (a, b) = (w[0].abs().powf(pw), w[1].abs().powf(pw));
            if a < t && t < b {
                Some(SubCase::Rising(n))
            } else if b < t && t < a {
                Some(SubCase::Falling(n))
            } else {
                None
            }
        })
        .ok_or_else(|| {
            Error::Range(format!("delta = {:e} is below the resolution of the {} retained modes", q.delta, q.mu.len()))
        })?;
    let (inf_down, sup_down) = consecutive_ratio_range(&q.mu, q.p);
    let (lower, upper) = match sub_case {
        // inf |μ_n/μ_{n+1}|^{p/2} ≤ ω/base ≤ sup |μ_{n+1}/μ_n|^{p/2}
        SubCase::Rising(_) => (inf_down * base, base / inf_down),
        SubCase::Falling(_) => (base / sup_down, sup_down * base),
        SubCase::Membership(_) => unreachable!(),
    };
    Ok(ModulusBounds { lower, upper, base, sub_case })
}

/// Maximizes `Σ x_n` subject to `Σ x_n/|μ_n|^p ≤ r²`, `Σ μ_n² x_n ≤ d2`, `x ≥ 0`
/// by enumerating vertices supported on one or two indices.
pub fn lp_vertex<T: Real>(mu: &[T], p: T, r: T, d2: T) -> LpVertex<T> {
    let r2 = r * r;
    let a: Vec<T> = mu.iter().map(|m| m.abs().powf(-p)).collect();
    let c: Vec<T> = mu.iter().map(|m| *m * *m).collect();
    let mut best = LpVertex { support: Vec::new(), value: T::zero() };
    if d2 == T::zero() {
        return best;
    }
    for i in 0..mu.len() {
        let x = (r2 / a[i]).min(d2 / c[i]);
        if x > best.value {
            best = LpVertex { support: vec![(i, x)], value: x };
        }
    }
    for i in 0..mu.len() {
        for j in i + 1..mu.len() {
            let det = a[i] * c[j] - a[j] * c[i];
            if det == T::zero() {
                continue;
            }
            let xi = (r2 * c[j] - a[j] * d2) / det;
            let xj = (a[i] * d2 - c[i] * r2) / det;
            if xi >= T::zero() && xj >= T::zero() && xi + xj > best.value {
                best = LpVertex { support: vec![(i, xi), (j, xj)], value: xi + xj };
            }
        }
    }
    best
}

/// Brute-force modulus for small truncations.
pub fn modulus_oracle<T: Real>(q: &ModulusQuery<T>) -> Result<T> {
    if q.mu.len() > ORACLE_MAX_MODES {
        return Err(Error::InvalidArgument(format!(
            "the oracle is limited to {} modes, got {}",
            ORACLE_MAX_MODES,
            q.mu.len()
        )));
    }
    let (d, factor) = q.centered_delta();
    Ok(factor * lp_vertex(&q.mu, q.p, q.r, d * d).value.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu8() -> Vec<f64> {
        (1..=8).map(|n| 1.0 / ((n * n) as f64 * 9.0)).collect()
    }

    #[test]
    fn closed_form_at_first_spectral_point() {
        let mu = mu8();
        let p = 1.5;
        let q = ModulusQuery::new(1.0, mu[0].powf((p + 2.0) / 2.0), p, mu.clone(), ModulusConvention::Centered).unwrap();
        assert_eq!(q.spectrum_membership(), Some(0));
        let w = modulus_closed_form(&q).unwrap();
        assert!((w - mu[0].powf(p / 2.0)).abs() < 1e-15);
        let q2 = ModulusQuery::new(2.0, 2.0 * mu[3].powf((p + 2.0) / 2.0), p, mu, ModulusConvention::Centered).unwrap();
        let w2 = modulus_closed_form(&q2).unwrap();
        assert!((w2 - 2f64.powf(2.0 / 3.5) * q2.delta.powf(p / 3.5)).abs() < 1e-15);
    }

    #[test]
    fn off_spectrum_refused_by_closed_form() {
        let q = ModulusQuery::new(1.0, 1e-3, 1.0, mu8(), ModulusConvention::Centered).unwrap();
        assert!(q.spectrum_membership().is_none());
        assert!(modulus_closed_form(&q).is_err());
    }

    #[test]
    fn oracle_single_mode() {
        let (r, p, m) = (1.3f64, 2.0, 0.2);
        for delta in [1e-4, 1e-2, 0.5] {
            let q = ModulusQuery::new(r, delta, p, vec![m], ModulusConvention::Pairwise).unwrap();
            let expect = 2.0 * (r * m.powf(p / 2.0)).min(delta / (2.0 * m));
            assert!((modulus_oracle(&q).unwrap() - expect).abs() < 1e-14 * expect);
        }
        let q = ModulusQuery::new(r, 0.0, p, vec![m], ModulusConvention::Pairwise).unwrap();
        assert_eq!(modulus_oracle(&q).unwrap(), 0.0);
    }

    #[test]
    fn centered_convention_matches_closed_form_pairwise_does_not() {
        let mu = vec![0.3f64, 0.05];
        let p = 1.0;
        for n in 0..2 {
            let delta = mu[n].powf((p + 2.0) / 2.0);
            let c = ModulusQuery::new(1.0, delta, p, mu.clone(), ModulusConvention::Centered).unwrap();
            let o = modulus_oracle(&c).unwrap();
            assert!((o - modulus_closed_form(&c).unwrap()).abs() < 1e-12 * o);
            let pw = ModulusQuery { convention: ModulusConvention::Pairwise, ..c.clone() };
            let raw = 2.0 * lp_vertex(&mu, p, 1.0, delta * delta / 4.0).value.sqrt();
            assert_eq!(modulus_oracle(&pw).unwrap(), raw);
            if n == 0 {
                assert!(raw > 1.2 * o);
            }
            let shifted = pw.with_delta(2.0 * delta).unwrap();
            assert!((modulus_oracle(&shifted).unwrap() - modulus_closed_form(&shifted).unwrap()).abs() < 1e-12 * o);
        }
    }

    #[test]
    fn bounds_bracket_oracle() {
        let mu = mu8();
        let p = 1.0;
        let base = ModulusQuery::new(1.0, 1e-6, p, mu.clone(), ModulusConvention::Centered).unwrap();
        let d_lo = mu[7].powf(1.5) * 1.01;
        let d_hi = base.delta_0();
        for k in 0..20 {
            let delta = d_lo * (d_hi / d_lo).powf((k as f64 + 0.37) / 20.0);
            let q = base.with_delta(delta).unwrap();
            let b = modulus_bounds(&q).unwrap();
            let o = modulus_oracle(&q).unwrap();
            assert!(b.lower <= b.upper);
            assert!(b.lower <= o * (1.0 + 1e-12) && o <= b.upper * (1.0 + 1e-12), "{:?} {}", b, o);
        }
    }

    #[test]
    fn bounds_reject_large_and_tiny_delta() {
        let q = ModulusQuery::new(1.0, 1.0, 1.0, mu8(), ModulusConvention::Centered).unwrap();
        assert!(matches!(modulus_bounds(&q), Err(Error::Range(_))));
        let q = q.with_delta(1e-20).unwrap();
        assert!(matches!(modulus_bounds(&q), Err(Error::Range(_))));
    }

    #[test]
    fn oracle_refuses_large_truncation() {
        let q = ModulusQuery::new(1.0, 1e-3, 1.0, vec![0.1; 17], ModulusConvention::Centered).unwrap();
        assert!(modulus_oracle(&q).is_err());
    }
}
