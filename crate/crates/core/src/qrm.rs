//! Quasi-reversibility: `f_α^δ = 𝕋_α^{-1} h^δ`, with a priori and
//! discrepancy-based choices of `α`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{check_alpha_b, qr_factor, ForwardOperator};
use crate::scalar::{l2_norm, Real};
use crate::spectral::{FieldRole, SmoothnessClass, SpectralCoefficients};
use crate::temporal::{check_assumption, AdmissibilityReport};

/// Relative accuracy of the discrepancy equation `ζ(α) = target`.
pub const MOROZOV_REL_TOL: f64 = 1e-10;
/// Doubling/halving steps allowed while bracketing the root.
pub const MOROZOV_MAX_BRACKET: usize = 200;
const MOROZOV_MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum ChoiceRule<T> {
    Manual,
    Apriori { delta: T, rho: T, p: T },
    Aposteriori { xi: T, delta: T, sigma: Option<T> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerConfig<T> {
    pub b: T,
    pub alpha: T,
    pub rule: ChoiceRule<T>,
}

impl<T: Real> RegularizerConfig<T> {
    pub fn new(b: T, alpha: T, rule: ChoiceRule<T>) -> Result<Self> {
        check_alpha_b(alpha, b)?;
        if alpha == T::zero() {
            return Err(Error::InvalidArgument("alpha must be positive".into()));
        }
        match rule {
            ChoiceRule::Manual => {}
            ChoiceRule::Apriori { delta, rho, p } => {
                SmoothnessClass::new(p, rho)?;
                check_delta(delta)?;
            }
            ChoiceRule::Aposteriori { xi, delta, sigma } => {
                check_xi_sigma(xi, b, sigma)?;
                check_delta(delta)?;
            }
        }
        Ok(Self { b, alpha, rule })
    }

    pub fn manual(b: T, alpha: T) -> Result<Self> {
        Self::new(b, alpha, ChoiceRule::Manual)
    }

    /// The noise level the rule was fed, if any.
    pub fn delta(&self) -> Option<T> {
        match self.rule {
            ChoiceRule::Manual => None,
            ChoiceRule::Apriori { delta, .. } | ChoiceRule::Aposteriori { delta, .. } => Some(delta),
        }
    }
}

fn check_delta<T: Real>(delta: T) -> Result<()> {
    if delta >= T::zero() && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("noise level delta = {} must be nonnegative", delta)))
    }
}

fn check_xi_sigma<T: Real>(xi: T, b: T, sigma: Option<T>) -> Result<()> {
    if !(xi > T::one() && xi.is_finite()) {
        return Err(Error::InvalidArgument(format!("xi = {} must exceed 1", xi)));
    }
    if b == T::lit(2.0) {
        match sigma {
            Some(s) if s > T::zero() && s < T::one() => {}
            Some(s) => return Err(Error::InvalidArgument(format!("sigma = {} must lie in (0, 1)", s))),
            None => return Err(Error::InvalidArgument("b = 2 needs sigma in (0, 1)".into())),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics<T> {
    /// `ζ(α) = ||𝔹_α h^δ - h^δ||`.
    pub discrepancy: T,
    /// `||𝕋 f_α^δ - h^δ||`, computed from the reconstruction itself.
    pub residual: T,
    /// The constant `C` of the lower bound `λ_n² |μ_n| ≥ C`.
    pub lower_bound_constant: T,
    /// `1 / (C α^{2/b})`, a Lipschitz constant of `h ↦ f_α`.
    pub lipschitz_constant: T,
    /// `δ / (C α^{2/b})` when the rule knows `δ`.
    pub noise_bound: Option<T>,
    pub morozov_target: Option<T>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction<T> {
    pub solution: SpectralCoefficients<T>,
    pub config: RegularizerConfig<T>,
    pub diagnostics: Diagnostics<T>,
}

/// `α = (δ/ϱ)^{b/(p+2)}` if `p < b`, else `(δ/ϱ)^{b/(b+2)}`.
pub fn apriori_alpha<T: Real>(delta: T, class: &SmoothnessClass<T>, b: T) -> Result<T> {
    check_alpha_b(T::one(), b)?;
    if !(delta > T::zero() && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta = {} must be positive", delta)));
    }
    let two = T::lit(2.0);
    let exponent = if class.p < b { b / (class.p + two) } else { b / (b + two) };
    Ok((delta / class.rho).powf(exponent))
}

/// `(p/b) ((b-p)/p)^{(b-p)/b}`, the maximum of `s ↦ s^{b-p}/(1+s^b)`.
pub fn c_apri1<T: Real>(p: T, b: T) -> T {
    (p / b) * ((b - p) / p).powf((b - p) / b)
}

/// `λ_1^{b-p}`.
pub fn c_apri2<T: Real>(lambda_1: T, p: T, b: T) -> T {
    lambda_1.powf(b - p)
}

/// `max_{s>0} α s^{b-p} / (1 + α s^b)` for `0 < p < b`, in closed form.
pub fn eta_max<T: Real>(alpha: T, p: T, b: T) -> T {
    c_apri1(p, b) * alpha.powf(p / b)
}

/// Bound on `||f - f_α||` over the class: `C_apri1 ϱ α^{p/b}` (p < b) or `λ_1^{b-p} ϱ α`.
pub fn bias_bound<T: Real>(class: &SmoothnessClass<T>, alpha: T, b: T, lambda_1: T) -> T {
    if class.p < b {
        c_apri1(class.p, b) * class.rho * alpha.powf(class.p / b)
    } else {
        c_apri2(lambda_1, class.p, b) * class.rho * alpha
    }
}

/// `δ / (C α^{2/b})`.
pub fn noise_bound<T: Real>(delta: T, alpha: T, b: T, c: T) -> T {
    delta / (c * alpha.powf(T::lit(2.0) / b))
}

/// Explicit constants of the discrepancy-rule error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AposterioriConstants<T> {
    /// `((ξ+2)/C)^{p/(p+2)}`
    pub c_apost: T,
    /// `||ψ||_∞^{2/(p+2)} / (C (ξ-1)^{2/(p+2)})`, used when `0 < p < b-2`.
    pub c3: T,
    /// `(1/C) [||ψ||_∞ / ((ξ-1) λ_1^{p-b+2})]^{2/b}`, used when `p ≥ b-2`.
    pub c4: T,
    /// `||ψ||_∞ / (C (ξ-1) λ_1^p)`, used when `b = 2`.
    pub c5: T,
}

impl<T: Real> AposterioriConstants<T> {
    pub fn new(c: T, psi_sup: T, xi: T, lambda_1: T, p: T, b: T) -> Self {
        let two = T::lit(2.0);
        let q = two / (p + two);
        Self {
            c_apost: ((xi + two) / c).powf(p / (p + two)),
            c3: psi_sup.powf(q) / (c * (xi - T::one()).powf(q)),
            c4: (psi_sup / ((xi - T::one()) * lambda_1.powf(p - b + two))).powf(two / b) / c,
            c5: psi_sup / (c * (xi - T::one()) * lambda_1.powf(p)),
        }
    }

    /// The error bound for `f ∈ S_{ϱ,p}` at noise level `δ`.
    pub fn bound(&self, rho: T, delta: T, p: T, b: T, sigma: Option<T>) -> T {
        let two = T::lit(2.0);
        let r = rho.powf(two / (p + two));
        if b == two {
            let s = sigma.unwrap_or(T::lit(0.5));
            self.c_apost * r * delta.powf(p * s / (p + two)) + self.c5 * rho * delta.powf(T::one() - s)
        } else if p < b - two {
            (self.c_apost + self.c3) * r * delta.powf(p / (p + two))
        } else {
            self.c_apost * r * delta.powf(p / (p + two)) + self.c4 * rho.powf(two / b) * delta.powf((b - two) / b)
        }
    }
}

/// `ζ(α) = (Σ (αλ_n^b / (1 + αλ_n^b))² |h_n|²)^{1/2}`.
pub fn discrepancy<T: Real>(h_delta: &SpectralCoefficients<T>, alpha: T, b: T) -> Result<T> {
    check_alpha_b(alpha, b)?;
    Ok(discrepancy_unchecked(h_delta, alpha, b))
}

fn discrepancy_unchecked<T: Real>(h: &SpectralCoefficients<T>, alpha: T, b: T) -> T {
    if alpha == T::zero() {
        return T::zero();
    }
    let terms: Vec<T> = h
        .coeffs()
        .iter()
        .zip(h.domain().modes())
        .map(|(c, m)| {
            let x = alpha * m.lambda.powf(b);
            // x / (1 + x), written to survive x = ∞
            *c / (T::one() + x.recip())
        })
        .collect();
    l2_norm(&terms)
}

/// `ξδ` for `b ≠ 2`, `ξδ^σ` for `b = 2`.
pub fn morozov_target<T: Real>(delta: T, xi: T, b: T, sigma: Option<T>) -> Result<T> {
    check_alpha_b(T::one(), b)?;
    check_xi_sigma(xi, b, sigma)?;
    if !(delta > T::zero() && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta = {} must be positive", delta)));
    }
    Ok(match sigma {
        Some(s) if b == T::lit(2.0) => xi * delta.powf(s),
        _ => xi * delta,
    })
}

/// The unique `α` with `ζ(α) = target`, to relative accuracy [`MOROZOV_REL_TOL`].
pub fn morozov_select<T: Real>(h_delta: &SpectralCoefficients<T>, delta: T, xi: T, b: T, sigma: Option<T>) -> Result<RegularizerConfig<T>> {
    let target = morozov_target(delta, xi, b, sigma)?;
    let alpha = solve_discrepancy(h_delta, target, b)?;
    RegularizerConfig::new(b, alpha, ChoiceRule::Aposteriori { xi, delta, sigma })
}

/// Root of `ζ(α) = target` by bracketing from `α = 1` and geometric bisection.
pub fn solve_discrepancy<T: Real>(h_delta: &SpectralCoefficients<T>, target: T, b: T) -> Result<T> {
    check_alpha_b(T::one(), b)?;
    if !(target > T::zero()) {
        return Err(Error::InvalidArgument(format!("discrepancy target {} must be positive", target)));
    }
    let norm = h_delta.l2_norm();
    if target >= norm {
        return Err(Error::NoSolution { target: target.as_f64(), norm: norm.as_f64() });
    }
    let tol = T::lit(MOROZOV_REL_TOL) * target;
    let zeta = |a: T| discrepancy_unchecked(h_delta, a, b);
    let two = T::lit(2.0);
    let (mut lo, mut hi) = (T::one(), T::one());
    let z1 = zeta(T::one());
    if (z1 - target).abs() <= tol {
        return Ok(T::one());
    }
    if z1 < target {
        let mut steps = 0;
        while zeta(hi) < target {
            lo = hi;
            hi = hi * two;
            steps += 1;
            if steps > MOROZOV_MAX_BRACKET {
                return Err(Error::NonConvergence { context: "bracketing the discrepancy root upward".into(), iterations: steps });
            }
        }
    } else {
        let mut steps = 0;
        while zeta(lo) > target {
            hi = lo;
            lo = lo / two;
            steps += 1;
            if steps > MOROZOV_MAX_BRACKET {
                return Err(Error::NonConvergence { context: "bracketing the discrepancy root downward".into(), iterations: steps });
            }
        }
    }
    for _ in 0..MOROZOV_MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let z = zeta(mid);
        if (z - target).abs() <= tol {
            return Ok(mid);
        }
        if z < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence { context: "bisection on the discrepancy equation".into(), iterations: MOROZOV_MAX_BISECTIONS })
}

/// QRM inversion bound to an admissible profile.
#[derive(Debug, Clone)]
pub struct QrmSolver<T> {
    op: Arc<ForwardOperator<T>>,
    report: AdmissibilityReport<T>,
    c: T,
}

impl<T: Real> QrmSolver<T> {
    /// Certifies the profile of `op` and refuses if it is not admissible.
    pub fn new(op: Arc<ForwardOperator<T>>) -> Result<Self> {
        let report = check_assumption(op.profile(), op.domain().first_eigenvalue())?;
        Self::with_report(op, report)
    }

    pub fn with_report(op: Arc<ForwardOperator<T>>, report: AdmissibilityReport<T>) -> Result<Self> {
        let c = report.require_admissible()?;
        if op.mu().iter().any(|m| *m == T::zero()) {
            return Err(Error::Inadmissible("some mu_n vanishes".into()));
        }
        Ok(Self { op, report, c })
    }

    pub fn operator(&self) -> &Arc<ForwardOperator<T>> {
        &self.op
    }

    pub fn report(&self) -> &AdmissibilityReport<T> {
        &self.report
    }

    pub fn lower_bound_constant(&self) -> T {
        self.c
    }

    pub fn lipschitz_constant(&self, alpha: T, b: T) -> T {
        noise_bound(T::one(), alpha, b, self.c)
    }

    /// `⟨f_α^δ, φ_n⟩ = h_n / ((1 + αλ_n^b) μ_n)`.
    pub fn invert(&self, h: &SpectralCoefficients<T>, cfg: RegularizerConfig<T>) -> Result<Reconstruction<T>> {
        let (alpha, b) = (cfg.alpha, cfg.b);
        check_alpha_b(alpha, b)?;
        if alpha == T::zero() {
            return Err(Error::InvalidArgument("alpha must be positive".into()));
        }
        let diag = self.op.diagonal(crate::forward::DiagonalKind::QuasiReversible { alpha, b })?;
        let solution = h.map_coeffs(FieldRole::Reconstruction, |i, c| c / diag.multipliers[i]);
        let predicted = self.op.apply_t(&solution)?;
        let residual = predicted.sub(h)?.l2_norm();
        let morozov_target = match cfg.rule {
            ChoiceRule::Aposteriori { xi, delta, sigma } if delta > T::zero() => Some(morozov_target(delta, xi, b, sigma)?),
            _ => None,
        };
        let diagnostics = Diagnostics {
            discrepancy: discrepancy_unchecked(h, alpha, b),
            residual,
            lower_bound_constant: self.c,
            lipschitz_constant: self.lipschitz_constant(alpha, b),
            noise_bound: cfg.delta().map(|d| noise_bound(d, alpha, b, self.c)),
            morozov_target,
        };
        Ok(Reconstruction { solution, config: cfg, diagnostics })
    }

    /// Reconstruction with `α` from [`apriori_alpha`].
    pub fn invert_apriori(&self, h_delta: &SpectralCoefficients<T>, delta: T, class: &SmoothnessClass<T>, b: T) -> Result<Reconstruction<T>> {
        let alpha = apriori_alpha(delta, class, b)?;
        let cfg = RegularizerConfig::new(b, alpha, ChoiceRule::Apriori { delta, rho: class.rho, p: class.p })?;
        self.invert(h_delta, cfg)
    }

    /// Reconstruction with `α` from [`morozov_select`].
    pub fn invert_aposteriori(&self, h_delta: &SpectralCoefficients<T>, delta: T, xi: T, b: T, sigma: Option<T>) -> Result<Reconstruction<T>> {
        let cfg = morozov_select(h_delta, delta, xi, b, sigma)?;
        self.invert(h_delta, cfg)
    }

    /// `f_α = 𝕋_α^{-1} 𝕋 f`, i.e. `f_n / (1 + αλ_n^b)`.
    pub fn noise_free(&self, f: &SpectralCoefficients<T>, alpha: T, b: T) -> Result<SpectralCoefficients<T>> {
        check_alpha_b(alpha, b)?;
        let lambdas: Vec<T> = self.op.domain().eigenvalues();
        Ok(f.map_coeffs(FieldRole::Reconstruction, |i, c| c / qr_factor(alpha, lambdas[i], b)))
    }

    pub fn aposteriori_constants(&self, xi: T, p: T, b: T) -> AposterioriConstants<T> {
        AposterioriConstants::new(self.c, self.op.psi_sup_norm(), xi, self.op.domain().first_eigenvalue(), p, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralDomain;
    use crate::temporal::TemporalProfile;
    use std::f64::consts::PI;

    fn solver(n: usize) -> QrmSolver<f64> {
        let d = Arc::new(SpectralDomain::<f64>::interval(1.0, n).unwrap());
        let p = Arc::new(TemporalProfile::<f64>::constant(1.0, 1.0).unwrap());
        QrmSolver::new(Arc::new(ForwardOperator::new(d, p).unwrap())).unwrap()
    }

    #[test]
    fn apriori_alpha_branches() {
        let c = SmoothnessClass::new(2.0, 1.0).unwrap();
        assert!((apriori_alpha(1e-4, &c, 4.0).unwrap() - 1e-4_f64).abs() < 1e-18);
        let c6 = SmoothnessClass::new(6.0, 1.0).unwrap();
        assert!((apriori_alpha(1e-4, &c6, 4.0).unwrap() - 1e-4_f64.powf(4.0 / 6.0)).abs() < 1e-16);
        let k: f64 = 3.7;
        let lhs: f64 = apriori_alpha(k * 1e-5, &c, 4.0).unwrap();
        let rhs = k.powf(4.0 / 4.0) * apriori_alpha(1e-5, &c, 4.0).unwrap();
        assert!((lhs - rhs).abs() <= 1e-15 * rhs);
    }

    #[test]
    fn constants_by_substitution() {
        assert!((c_apri1(1.0_f64, 2.0) - 0.5).abs() < 1e-16);
        assert_eq!(c_apri2(PI * PI, 3.0, 3.0), 1.0);
        let lam = PI * PI;
        let c = 1.0 - (1.0 + lam) * (-lam).exp();
        let nb = noise_bound(1e-3, 1e-2, 2.0, c);
        assert!((nb - 1e-3 / (c * 1e-2)).abs() < 1e-15);
        assert!((nb - 0.10006).abs() < 1e-5);
    }

    #[test]
    fn eta_lemma_matches_grid_maximum() {
        for &(alpha, p, b) in &[(1e-3, 1.0, 2.0), (0.5, 2.5, 4.0), (10.0, 0.3, 3.0), (1e-6, 5.0, 6.0)] {
            let f = |s: f64| alpha * s.powf(b - p) / (1.0 + alpha * s.powf(b));
            let s0 = ((b - p) / (p * alpha)).powf(1.0 / b);
            let grid_max = (0..20001)
                .map(|i| s0 * 10f64.powf(-2.0 + 4.0 * i as f64 / 20000.0))
                .map(f)
                .fold(0.0, f64::max);
            let closed = eta_max(alpha, p, b);
            assert!(closed >= grid_max * (1.0 - 1e-12));
            assert!((closed - f(s0)).abs() <= 1e-12 * closed);
        }
    }

    #[test]
    fn discrepancy_single_mode() {
        let s = solver(8);
        let e1 = SpectralCoefficients::unit(Arc::clone(s.operator().domain()), 1, FieldRole::Observation).unwrap();
        let z = discrepancy(&e1, 1.0, 2.0).unwrap();
        let p4 = PI.powi(4);
        assert!((z - p4 / (1.0 + p4)).abs() < 1e-15);
        assert_eq!(discrepancy(&e1, 0.0, 2.0).unwrap(), 0.0);
        assert!((discrepancy(&e1, f64::MAX, 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn morozov_single_mode_closed_form() {
        let s = solver(8);
        let c = 0.3;
        let h = SpectralCoefficients::unit(Arc::clone(s.operator().domain()), 1, FieldRole::Observation).unwrap().scaled(c);
        let (delta, xi, b) = (1e-3, 2.0, 4.0);
        let cfg = morozov_select(&h, delta, xi, b, None).unwrap();
        let t = xi * delta;
        // αλ^b/(1+αλ^b) = T/c
        let r = t / c;
        let expected = r / (1.0 - r) / (PI * PI).powf(b);
        assert!((cfg.alpha - expected).abs() <= 1e-9 * expected);
        let z = discrepancy(&h, cfg.alpha, b).unwrap();
        assert!((z - t).abs() <= MOROZOV_REL_TOL * t);
        let bigger = morozov_select(&h, delta, 2.0 * xi, b, None).unwrap();
        assert!(bigger.alpha > cfg.alpha);
    }

    #[test]
    fn morozov_rejects_bad_levels() {
        let s = solver(8);
        let h = SpectralCoefficients::unit(Arc::clone(s.operator().domain()), 2, FieldRole::Observation).unwrap().scaled(1e-3);
        assert!(matches!(morozov_select(&h, 1e-3, 2.0, 4.0, None), Err(Error::NoSolution { .. })));
        assert!(morozov_select(&h, 1e-6, 0.5, 4.0, None).is_err());
        assert!(morozov_select(&h, 1e-6, 2.0, 2.0, None).is_err());
        assert!(morozov_select(&h, 1e-6, 2.0, 2.0, Some(1.5)).is_err());
        assert!(morozov_select(&h, 1e-8, 2.0, 2.0, Some(0.5)).is_ok());
    }

    #[test]
    fn invert_round_trip_and_large_alpha() {
        let s = solver(16);
        let dom = Arc::clone(s.operator().domain());
        let e1 = SpectralCoefficients::unit(Arc::clone(&dom), 1, FieldRole::Source).unwrap();
        let h = s.operator().apply_t_alpha(&e1, 0.1, 3.0).unwrap();
        let rec = s.invert(&h, RegularizerConfig::manual(3.0, 0.1).unwrap()).unwrap();
        assert!(rec.solution.sub(&e1).unwrap().l2_norm() < 1e-14);
        let hf = s.operator().apply_t(&e1).unwrap();
        let small = s.invert(&hf, RegularizerConfig::manual(2.0, 1e12).unwrap()).unwrap();
        assert!(small.solution.l2_norm() < 1e-8);
        // residual of the reconstruction equals the discrepancy
        assert!((rec.diagnostics.residual - rec.diagnostics.discrepancy).abs() < 1e-15);
    }

    #[test]
    fn inadmissible_profile_is_refused() {
        let d = Arc::new(SpectralDomain::<f64>::interval(1.0, 8).unwrap());
        let p = Arc::new(TemporalProfile::<f64>::polynomial(1.0, vec![-0.5, 1.0]).unwrap());
        let op = Arc::new(ForwardOperator::new(d, p).unwrap());
        assert!(matches!(QrmSolver::new(op), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn bias_bound_holds_for_decay_sources() {
        let s = solver(128);
        let dom = Arc::clone(s.operator().domain());
        let lam1 = dom.first_eigenvalue();
        for &(p, b) in &[(1.0, 2.0), (2.0, 4.0), (6.0, 4.0), (2.0, 2.5)] {
            let raw: Vec<f64> = dom.modes().iter().map(|m| m.lambda.powf(-p - 0.5)).collect();
            let f = SpectralCoefficients::new(Arc::clone(&dom), raw, FieldRole::Source).unwrap();
            let f = f.scaled(1.0 / f.hp_norm(p).unwrap());
            let class = SmoothnessClass::new(p, 1.0).unwrap();
            for k in -12..=2 {
                let alpha = 10f64.powi(k);
                let fa = s.noise_free(&f, alpha, b).unwrap();
                let err = f.sub(&fa).unwrap().l2_norm();
                assert!(err <= bias_bound(&class, alpha, b, lam1) * (1.0 + 1e-12), "p={p} b={b} alpha={alpha}");
            }
        }
    }
}
