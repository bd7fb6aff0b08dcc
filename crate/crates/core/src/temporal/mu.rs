//! The time kernel `μ(λ, t) = ∫_0^t e^{-λ(t-s)} (t-s) ψ(s) ds`.
//!
//! Closed forms are used where the profile admits them; tabulated profiles
//! go through panel quadrature graded toward `s = t`, where the integrand
//! concentrates for large `λ`. The quadrature path is also exposed on its
//! own so it can serve as an independent check.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profile::{ProfileShape, TemporalProfile};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_panels, QuadratureOptions, QuadratureResult};
use crate::scalar::{one_minus_one_plus_x_exp, Real};
use crate::spectral::SpectralDomain;

fn check_args<T: Real>(profile: &TemporalProfile<T>, lambda: T, t: T) -> Result<()> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("eigenvalue {} must be positive", lambda)));
    }
    let slack = profile.horizon() * T::tol(1e-14);
    if !(t >= T::zero() && t <= profile.horizon() + slack) {
        return Err(Error::InvalidArgument(format!("time {} outside [0, {}]", t, profile.horizon())));
    }
    Ok(())
}

/// `μ(λ, t)` to about 1e-12 relative accuracy.
pub fn mu_coefficient<T: Real>(profile: &TemporalProfile<T>, lambda: T, t: T) -> Result<T> {
    check_args(profile, lambda, t)?;
    if t == T::zero() {
        return Ok(T::zero());
    }
    match profile.shape() {
        ProfileShape::Constant(c) => Ok(*c * one_minus_one_plus_x_exp(lambda * t) / (lambda * lambda)),
        ProfileShape::Polynomial(a) => Ok(polynomial_mu(a, lambda, t)),
        ProfileShape::PiecewiseTrig(pieces) => {
            let mut acc = T::zero();
            for p in pieces.iter().filter(|p| p.start < t) {
                let s1 = p.end.min(t);
                let z = Complex::new(lambda, p.freq);
                let j = segment_kernel(z, t - s1, t - p.start);
                // Re[(a - i b) e^{iωt} J]
                let phase = Complex::new((p.freq * t).cos(), (p.freq * t).sin());
                acc += (Complex::new(p.cos_amp, -p.sin_amp) * phase * j).re;
            }
            Ok(acc)
        }
        ProfileShape::Tabulated { .. } => mu_quadrature(profile, lambda, t).map(|r| r.value),
    }
}

/// `μ(λ, t)` by adaptive quadrature, with its error estimate.
pub fn mu_quadrature<T: Real>(profile: &TemporalProfile<T>, lambda: T, t: T) -> Result<QuadratureResult<T>> {
    check_args(profile, lambda, t)?;
    let t = t.min(profile.horizon());
    if t == T::zero() {
        return Ok(QuadratureResult { value: T::zero(), error: T::zero(), l1: T::zero() });
    }
    // Variable u = t - s; breakpoints at the boundary-layer scale 1/λ, doubling outward.
    let mut bps = vec![T::zero(), t];
    let mut u = T::lit(0.125) / lambda;
    while u < t {
        bps.push(u);
        u = u + u;
    }
    bps.extend(profile.knots().into_iter().filter(|k| *k > T::zero() && *k < t).map(|k| t - k));
    bps.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    bps.dedup();
    let integrand = |u: T| u * (-lambda * u).exp() * profile.value(t - u);
    integrate_panels(integrand, &bps, QuadratureOptions::default())
}

/// `∫_{u0}^{u1} u e^{-z u} du` for complex `z`.
fn segment_kernel<T: Real>(z: Complex<T>, u0: T, u1: T) -> Complex<T> {
    if z.norm() * u1 <= T::one() {
        let z2 = z * z;
        (phi2(z * u1) - phi2(z * u0)) / z2
    } else {
        let e = |u: T| (-z * u).exp() * (Complex::new(u, T::zero()) / z + (z * z).inv());
        e(u0) - e(u1)
    }
}

/// `1 - (1 + w) e^{-w}` for complex `w`, by series when `|w| < 1`.
fn phi2<T: Real>(w: Complex<T>) -> Complex<T> {
    if w.norm() < T::one() {
        let mut term = w * w / T::lit(2.0);
        let mut acc = term;
        for k in 3..40usize {
            let kf = T::from_index(k);
            term = -term * w * ((kf - T::one()) / (kf * (kf - T::lit(2.0))));
            acc += term;
            if term.norm() <= T::epsilon() * acc.norm() {
                break;
            }
        }
        acc
    } else {
        Complex::new(T::one(), T::zero()) - (w + T::one()) * (-w).exp()
    }
}

fn polynomial_mu<T: Real>(a: &[T], lambda: T, t: T) -> T {
    // ψ(t - u) = Σ_j b_j u^j with b_j = (-1)^j Σ_{k≥j} a_k C(k, j) t^{k-j}
    let deg = a.len() - 1;
    let x = lambda * t;
    let mut acc = T::zero();
    for j in 0..=deg {
        let mut b = T::zero();
        let mut binom = T::one();
        for k in j..=deg {
            if k > j {
                binom = binom * T::from_index(k) / T::from_index(k - j);
            }
            b += a[k] * binom * t.powi((k - j) as i32);
        }
        if j % 2 == 1 {
            b = -b;
        }
        // ∫_0^t u^{j+1} e^{-λu} du = γ(j+2, λt) / λ^{j+2}
        acc += b * lower_gamma_int(j + 2, x) / lambda.powi((j + 2) as i32);
    }
    acc
}

/// Lower incomplete gamma `γ(s, x)` for integer `s ≥ 1`.
fn lower_gamma_int<T: Real>(s: usize, x: T) -> T {
    let sf = T::from_index(s);
    if x <= sf + T::one() {
        // x^s e^{-x} Σ_k x^k / (s (s+1) … (s+k))
        let mut term = T::one() / sf;
        let mut sum = term;
        for k in 1..500usize {
            term = term * x / (sf + T::from_index(k));
            sum += term;
            if term <= T::epsilon() * sum {
                break;
            }
        }
        (sf * x.ln() - x).exp() * sum
    } else {
        // (s-1)! (1 - e^{-x} Σ_{k<s} x^k / k!)
        let mut term = T::one();
        let mut partial = T::one();
        let mut fact = T::one();
        for k in 1..s {
            term = term * x / T::from_index(k);
            partial += term;
            fact = fact * T::from_index(k);
        }
        fact * (T::one() - (-x).exp() * partial)
    }
}

/// `μ_n = μ(λ_n, τ)` for every mode of the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuSequence<T> {
    pub values: Vec<T>,
    pub max_abs: T,
}

pub fn mu_sequence<T: Real>(profile: &TemporalProfile<T>, domain: &SpectralDomain<T>) -> Result<MuSequence<T>> {
    let tau = profile.horizon();
    let values = domain
        .modes()
        .par_iter()
        .map(|m| mu_coefficient(profile, m.lambda, tau))
        .collect::<Result<Vec<T>>>()?;
    let max_abs = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    Ok(MuSequence { values, max_abs })
}
