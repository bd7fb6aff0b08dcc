//! Certificates for the lower bound `|μ_n| ≥ C / λ_n²`.
//!
//! A profile qualifies either by keeping a fixed sign, or by changing sign
//! with a small enough excursion on the set where it disagrees in sign with
//! `ψ(τ)`. Everything is checked on the dense grid from
//! [`TemporalProfile::check_grid`], with bisection at sign changes and
//! golden-section refinement at interior extrema.

use serde::{Deserialize, Serialize};

use super::profile::{golden_extremum, TemporalProfile};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_panels, QuadratureOptions};
use crate::scalar::{one_minus_one_plus_x_exp, Real};

/// Relative slack accepted when comparing `max |ψ|` on the sign-change set
/// against `M`. Tight certificates would otherwise flip on rounding.
pub const M_BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibleCase {
    FixedSign,
    SignChanging,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport<T> {
    pub case: AdmissibleCase,
    /// Why the profile failed; `None` when admissible.
    pub reason: Option<String>,
    pub horizon: T,
    pub lambda_1: T,
    pub tau0: Option<T>,
    pub kappa1: Option<T>,
    pub kappa2: Option<T>,
    /// Closed subintervals where `ψ(t) ψ(τ) ≤ 0` (sign-changing case).
    pub sign_change_set: Vec<[T; 2]>,
    /// Largest zero `τ_1` of `ψ` (sign-changing case).
    pub last_zero: Option<T>,
    pub m_bound: Option<T>,
    pub max_on_sign_change_set: Option<T>,
    pub c_tilde_threshold: Option<T>,
    pub c_tilde: Option<T>,
    /// `∫_{τ_1}^{τ_0} |ψ|` (sign-changing case).
    pub abs_integral: Option<T>,
    pub psi_at_zero: T,
    pub psi_at_horizon: T,
    pub sup_norm: T,
    /// The constant `C`; present iff the profile is admissible.
    pub lower_bound: Option<T>,
}

impl<T: Real> AdmissibilityReport<T> {
    pub fn is_admissible(&self) -> bool {
        self.case != AdmissibleCase::Fails
    }

    /// The constant `C`, or an [`Error::Inadmissible`] carrying the reason.
    pub fn require_admissible(&self) -> Result<T> {
        match (self.case, self.lower_bound) {
            (AdmissibleCase::Fails, _) | (_, None) => Err(Error::Inadmissible(
                self.reason.clone().unwrap_or_else(|| "profile is not admissible".into()),
            )),
            (_, Some(c)) => Ok(c),
        }
    }

    fn failing(mut self, reason: String) -> Self {
        self.case = AdmissibleCase::Fails;
        self.reason = Some(reason);
        self.lower_bound = None;
        self
    }
}

/// Largest point still satisfying `pred`, given `pred(a)` and `!pred(b)`.
fn bisect_boundary<T: Real>(pred: impl Fn(T) -> bool, a: T, b: T) -> T {
    let (mut lo, mut hi) = (a, b);
    for _ in 0..200 {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid == lo || mid == hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn m_bound<T: Real>(tau: T, tau0: T, kappa1: T) -> T {
    (tau - tau0) * (tau - tau0) * kappa1 / (T::lit(4.0) * tau * tau0)
}

/// Minimum of `f` over `[grid[j], grid[last]]`, refining interior grid minima.
fn refined_min<T: Real>(f: &impl Fn(T) -> T, grid: &[T], vals: &[T], j: usize) -> T {
    let mut best = vals[j..].iter().fold(T::infinity(), |m, v| m.min(*v));
    for i in j + 1..grid.len().saturating_sub(1) {
        if vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
            let (_, v) = golden_extremum(f, grid[i - 1], grid[i + 1]);
            best = best.min(v);
        }
    }
    best
}

/// Classifies `ψ` and produces the best certificate found.
///
/// `lambda_1` is the smallest eigenvalue of the spatial operator; it
/// selects the fixed-sign certificate and enters the constant `C`.
pub fn check_assumption<T: Real>(profile: &TemporalProfile<T>, lambda_1: T) -> Result<AdmissibilityReport<T>> {
    if !(lambda_1 > T::zero() && lambda_1.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda_1 = {} must be positive", lambda_1)));
    }
    let tau = profile.horizon();
    let sup = profile.sup_norm();
    let psi_tau = profile.value(tau);
    let report = AdmissibilityReport {
        case: AdmissibleCase::Fails,
        reason: None,
        horizon: tau,
        lambda_1,
        tau0: None,
        kappa1: None,
        kappa2: None,
        sign_change_set: Vec::new(),
        last_zero: None,
        m_bound: None,
        max_on_sign_change_set: None,
        c_tilde_threshold: None,
        c_tilde: None,
        abs_integral: None,
        psi_at_zero: profile.value(T::zero()),
        psi_at_horizon: psi_tau,
        sup_norm: sup,
        lower_bound: None,
    };
    if psi_tau.abs() <= T::epsilon() * sup || psi_tau == T::zero() {
        return Ok(report.failing(format!(
            "psi(tau) = {:e} vanishes, so no kappa_1 > 0 bounds |psi| near tau",
            psi_tau
        )));
    }
    let s = psi_tau.signum();
    let signed = |t: T| s * profile.value(t);
    let grid = profile.check_grid();
    let mut sv: Vec<T> = grid.iter().map(|t| signed(*t)).collect();

    // Sign changes hiding between grid points show up as small local minima.
    for i in 1..grid.len() - 1 {
        if sv[i] > T::zero() && sv[i] <= sv[i - 1] && sv[i] <= sv[i + 1] {
            let (_, v) = golden_extremum(signed, grid[i - 1], grid[i + 1]);
            if v < T::zero() {
                sv[i] = v;
            }
        }
    }
    let changes_sign = sv.iter().any(|v| *v < T::zero());
    if !changes_sign {
        fixed_sign(profile, report, &grid, &sv)
    } else {
        sign_changing(profile, report, &grid, &sv)
    }
}

fn fixed_sign<T: Real>(
    profile: &TemporalProfile<T>,
    mut report: AdmissibilityReport<T>,
    grid: &[T],
    absv: &[T],
) -> Result<AdmissibilityReport<T>> {
    let tau = profile.horizon();
    let lambda_1 = report.lambda_1;
    let n = grid.len();
    let mut suffix = vec![T::zero(); n];
    suffix[n - 1] = absv[n - 1];
    for j in (0..n - 1).rev() {
        suffix[j] = suffix[j + 1].min(absv[j]);
    }
    // Maximize κ_1 φ(λ_1 (τ - τ_0)) over grid candidates τ_0 = t_j < τ.
    let mut best: Option<(usize, T)> = None;
    for j in 0..n - 1 {
        if suffix[j] <= T::zero() {
            continue;
        }
        let c = suffix[j] * one_minus_one_plus_x_exp(lambda_1 * (tau - grid[j]));
        if best.map_or(true, |(_, bc)| c > bc) {
            best = Some((j, c));
        }
    }
    let Some((j, _)) = best else {
        return Ok(report.failing("|psi| has no positive lower bound on any [tau_0, tau]".into()));
    };
    let abs = |t: T| profile.value(t).abs();
    let mut kappa1 = suffix[j];
    let mut tau0 = grid[j];
    if j > 0 {
        tau0 = bisect_boundary(|t| abs(t) < kappa1, grid[j - 1], grid[j]);
        // `bisect_boundary` returns the last point below κ_1; step to the first point at or above it.
        tau0 = next_at_or_above(&abs, kappa1, tau0, grid[j]);
    }
    kappa1 = kappa1.min(refined_min(&abs, grid, absv, j)).min(abs(tau0));
    report.case = AdmissibleCase::FixedSign;
    report.tau0 = Some(tau0);
    report.kappa1 = Some(kappa1);
    report.kappa2 = Some(profile.derivative_bound().value);
    finish(report)
}

/// Smallest representable `t` in `[lo, hi]` with `f(t) ≥ level`, assuming `f(hi) ≥ level`.
fn next_at_or_above<T: Real>(f: &impl Fn(T) -> T, level: T, lo: T, hi: T) -> T {
    let mut t = lo;
    for _ in 0..4 {
        if f(t) >= level {
            return t;
        }
        let step = (t.abs() * T::epsilon()).max(T::min_positive_value());
        t = (t + step).min(hi);
    }
    hi
}

fn sign_changing<T: Real>(
    profile: &TemporalProfile<T>,
    mut report: AdmissibilityReport<T>,
    grid: &[T],
    sv: &[T],
) -> Result<AdmissibilityReport<T>> {
    let tau = profile.horizon();
    let s = report.psi_at_horizon.signum();
    let signed = |t: T| s * profile.value(t);
    let abs = |t: T| profile.value(t).abs();
    let in_sc = |t: T| signed(t) <= T::zero();
    let n = grid.len();

    // Runs of grid points inside I_sc, with endpoints refined by bisection.
    let mut runs: Vec<[T; 2]> = Vec::new();
    let mut run_idx: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if sv[i] <= T::zero() {
            let start_i = i;
            while i + 1 < n && sv[i + 1] <= T::zero() {
                i += 1;
            }
            let a = if start_i == 0 {
                grid[0]
            } else {
                // last point outside before the run, searched from the inside
                bisect_boundary(|t| in_sc(t), grid[start_i], grid[start_i - 1])
            };
            let b = if i + 1 == n { grid[n - 1] } else { bisect_boundary(|t| in_sc(t), grid[i], grid[i + 1]) };
            runs.push([a.min(b), a.max(b)]);
            run_idx.push((start_i, i));
        }
        i += 1;
    }
    let tau1 = runs.last().expect("sign change implies a nonempty set")[1];
    report.sign_change_set = runs.clone();
    report.last_zero = Some(tau1);

    let mut max_sc = T::zero();
    for ((a, b), run) in run_idx.iter().zip(&runs) {
        max_sc = max_sc.max(abs(run[0])).max(abs(run[1]));
        for k in *a..=*b {
            max_sc = max_sc.max(abs(grid[k]));
            if k > 0 && k + 1 < n && sv[k] <= sv[k - 1] && sv[k] <= sv[k + 1] {
                let lo = grid[k - 1].max(run[0]);
                let hi = grid[k + 1].min(run[1]);
                if hi > lo {
                    let (_, v) = golden_extremum(|t| -abs(t), lo, hi);
                    max_sc = max_sc.max(-v);
                }
            }
        }
    }
    report.max_on_sign_change_set = Some(max_sc);
    let kappa2 = profile.derivative_bound().value;
    report.kappa2 = Some(kappa2);

    // Candidates τ_0 in (τ_1, τ); κ_1(τ_0) is the suffix minimum of |ψ|.
    let first = grid.partition_point(|t| *t <= tau1);
    if first >= n - 1 {
        return Ok(report.failing("psi has no room between its last zero and tau".into()));
    }
    let absv: Vec<T> = grid.iter().map(|t| abs(*t)).collect();
    let mut suffix = vec![T::zero(); n];
    suffix[n - 1] = absv[n - 1];
    for j in (first..n - 1).rev() {
        suffix[j] = suffix[j + 1].min(absv[j]);
    }
    let slack = T::one() + T::lit(M_BOUND_SLACK);
    let feasible = |t0: T, k1: T| t0 > T::zero() && max_sc <= m_bound(tau, t0, k1) * slack;
    let mut best: Option<usize> = None;
    for j in first..n - 1 {
        if feasible(grid[j], suffix[j]) && best.map_or(true, |b| suffix[j] > suffix[b]) {
            best = Some(j);
        }
    }
    let Some(j) = best else {
        let best_m = (first..n - 1).map(|j| m_bound(tau, grid[j], suffix[j])).fold(T::zero(), |m, v| m.max(v));
        return Ok(report.failing(format!(
            "max |psi| on the sign-change set is {:e}, above every admissible M (best {:e})",
            max_sc, best_m
        )));
    };

    // Push τ_0 right inside the next cell while M stays above max |ψ| on I_sc.
    let mut tau0 = grid[j];
    let mut kappa1 = suffix[j];
    if j + 1 < n - 1 && suffix[j + 1] > suffix[j] {
        let cap = suffix[j + 1];
        let kappa_at = |t: T| abs(t).min(cap);
        let g = |t: T| m_bound(tau, t, kappa_at(t)) - max_sc;
        if g(grid[j]) >= T::zero() && g(grid[j + 1]) < T::zero() {
            tau0 = bisect_boundary(|t| g(t) >= T::zero(), grid[j], grid[j + 1]);
            kappa1 = kappa_at(tau0);
        }
    }
    let lo_idx = grid.partition_point(|t| *t < tau0).min(n - 1);
    kappa1 = kappa1.min(refined_min(&abs, grid, &absv, lo_idx)).min(abs(tau0));
    let m = m_bound(tau, tau0, kappa1);
    if !(max_sc <= m * slack) {
        return Ok(report.failing(format!("refined certificate lost the M-bound ({:e} > {:e})", max_sc, m)));
    }
    report.case = AdmissibleCase::SignChanging;
    report.tau0 = Some(tau0);
    report.kappa1 = Some(kappa1);
    report.m_bound = Some(m);

    let threshold = (report.psi_at_zero.abs() + T::lit(2.0) * tau * kappa2) / (tau * report.psi_at_horizon.abs());
    report.c_tilde_threshold = Some(threshold);
    report.c_tilde = Some(T::lit(2.0) * threshold);
    let mut bps = vec![tau1, tau0];
    bps.extend(profile.knots().into_iter().filter(|k| *k > tau1 && *k < tau0));
    bps.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
    let integral = integrate_panels(abs, &bps, QuadratureOptions::default())?;
    report.abs_integral = Some(integral.value);
    finish(report)
}

fn finish<T: Real>(mut report: AdmissibilityReport<T>) -> Result<AdmissibilityReport<T>> {
    report.reason = None;
    let lambda_1 = report.lambda_1;
    match lower_bound_constant(&report, lambda_1) {
        Ok(c) => {
            report.lower_bound = Some(c);
            Ok(report)
        }
        Err(Error::InvalidCertificate(msg)) => Ok(report.failing(msg)),
        Err(e) => Err(e),
    }
}

/// The constant `C` with `λ_n² |μ_n| ≥ C` for every `n`.
///
/// Fixed sign: `κ_1 [1 - (1 + λ_1(τ-τ_0)) e^{-λ_1(τ-τ_0)}]`. Sign change:
/// the smaller of the constants for `λ_n ≤ C̃` and `λ_n ≥ C̃`.
pub fn lower_bound_constant<T: Real>(report: &AdmissibilityReport<T>, lambda_1: T) -> Result<T> {
    let missing = |what: &str| Error::InvalidCertificate(format!("report lacks {}", what));
    let tau = report.horizon;
    let c = match report.case {
        AdmissibleCase::Fails => {
            return Err(Error::Inadmissible(report.reason.clone().unwrap_or_else(|| "profile is not admissible".into())))
        }
        AdmissibleCase::FixedSign => {
            let tau0 = report.tau0.ok_or_else(|| missing("tau_0"))?;
            let kappa1 = report.kappa1.ok_or_else(|| missing("kappa_1"))?;
            kappa1 * one_minus_one_plus_x_exp(lambda_1 * (tau - tau0))
        }
        AdmissibleCase::SignChanging => {
            let tau0 = report.tau0.ok_or_else(|| missing("tau_0"))?;
            let tau1 = report.last_zero.ok_or_else(|| missing("tau_1"))?;
            let c_tilde = report.c_tilde.ok_or_else(|| missing("C-tilde"))?;
            let kappa2 = report.kappa2.ok_or_else(|| missing("kappa_2"))?;
            let integral = report.abs_integral.ok_or_else(|| missing("the integral of |psi|"))?;
            let low = lambda_1 * lambda_1 * (-c_tilde * (tau - tau1)).exp() * (tau - tau0) * integral;
            let high = report.psi_at_horizon.abs() - (report.psi_at_zero.abs() + T::lit(2.0) * tau * kappa2) / (tau * c_tilde);
            low.min(high)
        }
    };
    if c > T::zero() && c.is_finite() {
        Ok(c)
    } else {
        Err(Error::InvalidCertificate(format!("lower-bound constant {:e} is not positive", c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::profile::TrigPiece;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn example_profile() -> TemporalProfile<f64> {
        let small = 1.0 / (48.0 * 2f64.sqrt());
        TemporalProfile::<f64>::piecewise_trig(
            PI,
            vec![
                TrigPiece { start: 0.0, end: PI / 2.0, cos_amp: small, sin_amp: 0.0, freq: 1.0 },
                TrigPiece { start: PI / 2.0, end: PI, cos_amp: 1.0, sin_amp: 0.0, freq: 1.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn constant_profile_is_fixed_sign_with_full_interval() {
        let p = TemporalProfile::<f64>::constant(1.0, 1.0).unwrap();
        let lam = PI * PI;
        let r = check_assumption(&p, lam).unwrap();
        assert_eq!(r.case, AdmissibleCase::FixedSign);
        assert_eq!(r.tau0, Some(0.0));
        assert_eq!(r.kappa1, Some(1.0));
        let expected = 1.0 - (1.0 + lam) * (-lam).exp();
        assert!((r.lower_bound.unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.99944).abs() < 1e-5);
    }

    #[test]
    fn example_certificate_is_reproduced() {
        let r = check_assumption(&example_profile(), 1.0).unwrap();
        assert_eq!(r.case, AdmissibleCase::SignChanging, "{:?}", r.reason);
        assert!((r.kappa1.unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((r.tau0.unwrap() - 0.75 * PI).abs() < 1e-12);
        let m = 1.0 / (48.0 * 2f64.sqrt());
        assert!((r.m_bound.unwrap() - m).abs() < 1e-12 * m);
        assert_eq!(r.sign_change_set.len(), 1);
        assert_eq!(r.sign_change_set[0][0], 0.0);
        assert!((r.sign_change_set[0][1] - PI / 2.0).abs() < 1e-12);
        assert!((r.last_zero.unwrap() - PI / 2.0).abs() < 1e-12);
        assert!((r.max_on_sign_change_set.unwrap() - m).abs() < 1e-15);
        let threshold = r.c_tilde_threshold.unwrap();
        assert!(r.c_tilde.unwrap() > threshold);
        assert!(r.lower_bound.unwrap() > 0.0);
    }

    #[test]
    fn linear_profile_fails_m_bound() {
        let p = TemporalProfile::<f64>::polynomial(1.0, vec![-0.5, 1.0]).unwrap();
        let r = check_assumption(&p, PI * PI).unwrap();
        assert_eq!(r.case, AdmissibleCase::Fails);
        // oracle: direct grid maximum against the best M anywhere on (1/2, 1)
        let max_sc = (0..=1000).map(|i| (i as f64 / 2000.0 - 0.5).abs()).fold(0.0, f64::max);
        let best_m = (1..1000)
            .map(|i| {
                let t0 = 0.5 + i as f64 / 2000.0;
                (1.0 - t0).powi(2) * (t0 - 0.5) / (4.0 * t0)
            })
            .fold(0.0, f64::max);
        assert!(max_sc > best_m);
        assert!(r.reason.clone().unwrap().contains("sign-change"));
        assert!(r.require_admissible().is_err());
    }

    #[test]
    fn vanishing_at_horizon_fails() {
        let p = TemporalProfile::<f64>::polynomial(1.0, vec![1.0, -1.0]).unwrap();
        let r = check_assumption(&p, 1.0).unwrap();
        assert_eq!(r.case, AdmissibleCase::Fails);
        assert!(matches!(lower_bound_constant(&r, 1.0), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn increasing_profile_certificate_holds_on_grid() {
        let p = TemporalProfile::<f64>::polynomial(2.0, vec![0.0, 1.0, 0.5]).unwrap();
        let lam = 2.0;
        let r = check_assumption(&p, lam).unwrap();
        assert_eq!(r.case, AdmissibleCase::FixedSign);
        let (t0, k1) = (r.tau0.unwrap(), r.kappa1.unwrap());
        assert!(t0 > 0.0 && t0 < 2.0);
        for t in p.check_grid().into_iter().filter(|t| *t >= t0) {
            assert!(p.value(t).abs() >= k1 * (1.0 - 1e-14));
        }
        // C-maximizing pair beats a few hand-picked ones
        let c = r.lower_bound.unwrap();
        for s0 in [0.1, 0.5, 1.0, 1.5] {
            let k = p.value(s0);
            assert!(c >= k * one_minus_one_plus_x_exp(lam * (2.0 - s0)) * (1.0 - 1e-9));
        }
    }

    #[test]
    fn negative_fixed_sign_profile_is_accepted() {
        let p = TemporalProfile::<f64>::constant(2.0, -3.0).unwrap();
        let r = check_assumption(&p, 1.0).unwrap();
        assert_eq!(r.case, AdmissibleCase::FixedSign);
        assert_eq!(r.kappa1, Some(3.0));
    }

    #[test]
    fn kappa_to_zero_sends_constant_to_zero() {
        let mut r = check_assumption(&TemporalProfile::<f64>::constant(1.0, 1.0).unwrap(), PI * PI).unwrap();
        let base = r.lower_bound.unwrap();
        for k in [1e-3, 1e-6, 1e-9] {
            r.kappa1 = Some(k);
            let c = lower_bound_constant(&r, PI * PI).unwrap();
            assert!((c - k * base).abs() <= 1e-15 * base);
        }
    }
}
