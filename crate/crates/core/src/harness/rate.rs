//! Convergence-rate experiments: error of `f_α^δ` against `δ` on a
//! geometric grid, with a least-squares slope in log-log coordinates.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::{add_noise, decay_law_source, trial_seed};
use crate::error::{Error, Result};
use crate::forward::ForwardOperator;
use crate::qrm::{apriori_alpha, bias_bound, morozov_select, noise_bound, QrmSolver, RegularizerConfig, ChoiceRule};
use crate::scalar::{pairwise_sum, Real};
use crate::spectral::{FieldRole, SmoothnessClass, SpectralCoefficients, SpectralDomain};
use crate::temporal::TemporalProfile;

/// Fitted slope must be at least `expected - SLOPE_TOLERANCE`.
pub const SLOPE_TOLERANCE: f64 = 0.1;
pub const MIN_FIT_POINTS: usize = 4;
/// Points whose `α` falls below this multiple of machine epsilon are dropped.
pub const ALPHA_FLOOR_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SourceSpec<T> {
    Coefficients { values: Vec<T> },
    DecayLaw { q: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum RuleSpec<T> {
    Apriori,
    Aposteriori { xi: T, sigma: Option<T> },
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec<T> {
    pub domain: Arc<SpectralDomain<T>>,
    pub profile: Arc<TemporalProfile<T>>,
    pub source: SourceSpec<T>,
    pub class: SmoothnessClass<T>,
    pub b: T,
    /// Strictly decreasing, positive.
    pub deltas: Vec<T>,
    pub rule: RuleSpec<T>,
    pub seed: u64,
    pub trials: usize,
}

impl<T: Real> ExperimentSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.b >= T::lit(2.0) && self.b.is_finite()) {
            return Err(Error::InvalidArgument(format!("order b = {} must be at least 2", self.b)));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > T::zero() && d.is_finite())) {
            return Err(Error::InvalidArgument("noise levels must be positive and finite".into()));
        }
        if self.deltas.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidArgument("noise levels must be strictly decreasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("at least one trial per noise level is required".into()));
        }
        if let RuleSpec::Aposteriori { xi, sigma } = self.rule {
            crate::qrm::morozov_target(T::one(), xi, self.b, sigma)?;
        }
        let f = self.source_field()?;
        if !f.in_source_set(&self.class) {
            return Err(Error::InvalidArgument(format!(
                "source has H_{} norm {:e}, above rho = {:e}",
                self.class.p,
                f.hp_norm(self.class.p)?,
                self.class.rho
            )));
        }
        Ok(())
    }

    pub fn source_field(&self) -> Result<SpectralCoefficients<T>> {
        match &self.source {
            SourceSpec::Coefficients { values } => SpectralCoefficients::new(Arc::clone(&self.domain), values.clone(), FieldRole::Source),
            SourceSpec::DecayLaw { q } => decay_law_source(Arc::clone(&self.domain), &self.class, *q),
        }
    }

    pub fn sigma(&self) -> Option<T> {
        match self.rule {
            RuleSpec::Apriori => None,
            RuleSpec::Aposteriori { sigma, .. } => sigma,
        }
    }
}

/// Rate exponent the theory predicts for this rule and smoothness.
pub fn expected_exponent<T: Real>(rule: &RuleSpec<T>, p: T, b: T) -> T {
    let two = T::lit(2.0);
    match rule {
        RuleSpec::Apriori if p < b => p / (p + two),
        RuleSpec::Apriori => b / (b + two),
        RuleSpec::Aposteriori { sigma, .. } if b == two => {
            let s = sigma.unwrap_or(T::lit(0.5));
            (p * s / (p + two)).min(T::one() - s)
        }
        RuleSpec::Aposteriori { .. } if p < b - two => p / (p + two),
        RuleSpec::Aposteriori { .. } => (p / (p + two)).min((b - two) / b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum PointStatus {
    Used,
    /// Every trial at this level was rejected (e.g. discrepancy target above `||h^δ||`).
    Skipped(String),
    /// The rule drove `α` below the floating-point floor.
    Dropped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint<T> {
    pub delta: T,
    /// Mean `α` over the trials that ran.
    pub alpha: T,
    pub mean_error: T,
    pub max_error: T,
    /// Theoretical bound at this `δ` (explicit constants).
    pub bound: T,
    pub bound_violations: usize,
    pub trials_used: usize,
    /// Largest `|ζ(α) - target| / target` over the trials (discrepancy rule).
    pub max_discrepancy_residual: Option<T>,
    pub status: PointStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Root-mean-square residual of the fit in log10 units.
    pub residual: T,
    pub points: usize,
}

/// Least squares of `log10 err` on `log10 δ`.
pub fn fit_loglog<T: Real>(deltas: &[T], errors: &[T]) -> Result<SlopeFit<T>> {
    let pts: Vec<(T, T)> = deltas
        .iter()
        .zip(errors)
        .filter(|(d, e)| **d > T::zero() && **e > T::zero() && e.is_finite())
        .map(|(d, e)| (d.log10(), e.log10()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit { valid: pts.len(), required: MIN_FIT_POINTS });
    }
    let n = T::from_index(pts.len());
    let xs: Vec<T> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<T> = pts.iter().map(|p| p.1).collect();
    let mx = pairwise_sum(&xs) / n;
    let my = pairwise_sum(&ys) / n;
    let sxx = pairwise_sum(&xs.iter().map(|x| (*x - mx) * (*x - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(&pts.iter().map(|(x, y)| (*x - mx) * (*y - my)).collect::<Vec<_>>());
    if sxx == T::zero() {
        return Err(Error::DegenerateFit { valid: 1, required: MIN_FIT_POINTS });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss = pairwise_sum(&pts.iter().map(|(x, y)| (*y - intercept - slope * *x).powi(2)).collect::<Vec<_>>());
    Ok(SlopeFit { slope, intercept, residual: (ss / n).sqrt(), points: pts.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub slope_ok: bool,
    pub bounds_ok: bool,
    pub criteria: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport<T> {
    pub rule: RuleSpec<T>,
    pub p: T,
    pub b: T,
    pub rho: T,
    pub lower_bound_constant: T,
    pub points: Vec<RatePoint<T>>,
    pub fit: SlopeFit<T>,
    pub expected_exponent: T,
    /// Whether the per-point bound enters the verdict (explicit constant).
    pub bound_in_verdict: bool,
    pub verdict: Verdict,
    pub truncation_tail_bound: T,
    pub runtime_secs: f64,
}

struct TrialOutcome<T> {
    alpha: T,
    error: T,
    discrepancy_residual: Option<T>,
    dropped: bool,
}

/// Runs the experiment; per-`δ` trials execute in parallel, aggregation is
/// order-fixed so reports are bit-stable for a given seed.
pub fn run_rate_experiment<T: Real>(spec: &ExperimentSpec<T>) -> Result<RateReport<T>> {
    let started = Instant::now();
    spec.validate()?;
    let op = Arc::new(ForwardOperator::new(Arc::clone(&spec.domain), Arc::clone(&spec.profile))?);
    let solver = QrmSolver::new(Arc::clone(&op))?;
    run_with_solver(spec, &solver, started)
}

pub(crate) fn run_with_solver<T: Real>(spec: &ExperimentSpec<T>, solver: &QrmSolver<T>, started: Instant) -> Result<RateReport<T>> {
    let op = solver.operator();
    let f = spec.source_field()?;
    let h = op.apply_t(&f)?;
    let c = solver.lower_bound_constant();
    let lambda_1 = op.domain().first_eigenvalue();
    let alpha_floor = T::lit(ALPHA_FLOOR_FACTOR) * T::epsilon();
    let b = spec.b;

    let tasks: Vec<(usize, usize)> = (0..spec.deltas.len()).flat_map(|i| (0..spec.trials).map(move |j| (i, j))).collect();
    let outcomes: Vec<Result<Option<TrialOutcome<T>>>> = tasks
        .par_iter()
        .map(|&(i, j)| {
            let delta = spec.deltas[i];
            let h_delta = add_noise(&h, delta, trial_seed(spec.seed, i, j))?;
            let cfg = match spec.rule {
                RuleSpec::Apriori => {
                    let alpha = apriori_alpha(delta, &spec.class, b)?;
                    if alpha < alpha_floor {
                        return Ok(Some(TrialOutcome { alpha, error: T::nan(), discrepancy_residual: None, dropped: true }));
                    }
                    RegularizerConfig::new(b, alpha, ChoiceRule::Apriori { delta, rho: spec.class.rho, p: spec.class.p })?
                }
                RuleSpec::Aposteriori { xi, sigma } => match morozov_select(&h_delta, delta, xi, b, sigma) {
                    Ok(cfg) => cfg,
                    Err(Error::NoSolution { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                },
            };
            if cfg.alpha < alpha_floor {
                return Ok(Some(TrialOutcome { alpha: cfg.alpha, error: T::nan(), discrepancy_residual: None, dropped: true }));
            }
            let rec = solver.invert(&h_delta, cfg)?;
            let error = rec.solution.sub(&f)?.l2_norm();
            let discrepancy_residual = rec.diagnostics.morozov_target.map(|t| (rec.diagnostics.discrepancy - t).abs() / t);
            Ok(Some(TrialOutcome { alpha: cfg.alpha, error, discrepancy_residual, dropped: false }))
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let apost = match spec.rule {
        RuleSpec::Aposteriori { xi, .. } => Some(solver.aposteriori_constants(xi, spec.class.p, b)),
        RuleSpec::Apriori => None,
    };
    let mut points = Vec::with_capacity(spec.deltas.len());
    for (i, &delta) in spec.deltas.iter().enumerate() {
        let chunk = &outcomes[i * spec.trials..(i + 1) * spec.trials];
        let ran: Vec<&TrialOutcome<T>> = chunk.iter().flatten().collect();
        let used: Vec<&TrialOutcome<T>> = ran.iter().copied().filter(|o| !o.dropped).collect();
        let alpha = if ran.is_empty() {
            T::nan()
        } else {
            pairwise_sum(&ran.iter().map(|o| o.alpha).collect::<Vec<_>>()) / T::from_index(ran.len())
        };
        let bound = match &apost {
            None => bias_bound(&spec.class, alpha, b, lambda_1) + noise_bound(delta, alpha, b, c),
            Some(k) => k.bound(spec.class.rho, delta, spec.class.p, b, spec.sigma()),
        };
        let status = if ran.is_empty() {
            PointStatus::Skipped("discrepancy target not below ||h_delta|| in any trial".into())
        } else if used.is_empty() {
            PointStatus::Dropped(format!("alpha = {:e} below {:e}", alpha, alpha_floor))
        } else {
            PointStatus::Used
        };
        let errors: Vec<T> = used.iter().map(|o| o.error).collect();
        let (mean_error, max_error) = if errors.is_empty() {
            (T::nan(), T::nan())
        } else {
            (pairwise_sum(&errors) / T::from_index(errors.len()), errors.iter().fold(T::zero(), |m, e| m.max(*e)))
        };
        let tol = T::one() + T::tol(1e-12);
        points.push(RatePoint {
            delta,
            alpha,
            mean_error,
            max_error,
            bound,
            bound_violations: errors.iter().filter(|e| !(**e <= bound * tol)).count(),
            trials_used: used.len(),
            max_discrepancy_residual: used
                .iter()
                .filter_map(|o| o.discrepancy_residual)
                .fold(None, |m: Option<T>, r| Some(m.map_or(r, |m| m.max(r)))),
            status,
        });
    }

    let (ds, es): (Vec<T>, Vec<T>) =
        points.iter().filter(|p| p.status == PointStatus::Used).map(|p| (p.delta, p.mean_error)).unzip();
    let fit = fit_loglog(&ds, &es)?;
    let expected = expected_exponent(&spec.rule, spec.class.p, b);
    let bound_in_verdict = matches!(spec.rule, RuleSpec::Apriori);
    let slope_ok = fit.slope >= expected - T::lit(SLOPE_TOLERANCE);
    let violations: usize = points.iter().map(|p| p.bound_violations).sum();
    let bounds_ok = !bound_in_verdict || violations == 0;
    let criteria = format!(
        "slope {:.4} >= {:.4} - {}{}",
        fit.slope.as_f64(),
        expected.as_f64(),
        SLOPE_TOLERANCE,
        if bound_in_verdict { "; every error within the explicit a priori bound" } else { "" }
    );
    Ok(RateReport {
        rule: spec.rule,
        p: spec.class.p,
        b,
        rho: spec.class.rho,
        lower_bound_constant: c,
        points,
        fit,
        expected_exponent: expected,
        bound_in_verdict,
        verdict: Verdict { pass: slope_ok && bounds_ok, slope_ok, bounds_ok, criteria },
        truncation_tail_bound: solver.operator().truncation_tail_bound(f.l2_norm()),
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_power_law() {
        let ds: Vec<f64> = (0..6).map(|k| 10f64.powi(-2 - k)).collect();
        let es: Vec<f64> = ds.iter().map(|d| 3.0 * d.powf(0.4)).collect();
        let fit = fit_loglog(&ds, &es).unwrap();
        assert!((fit.slope - 0.4).abs() < 1e-12);
        assert!((fit.intercept - 3f64.log10()).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(matches!(fit_loglog(&ds[..3], &es[..3]), Err(Error::DegenerateFit { valid: 3, .. })));
    }

    #[test]
    fn expected_exponents_by_branch() {
        let ap = RuleSpec::<f64>::Apriori;
        assert_eq!(expected_exponent(&ap, 2.0, 4.0), 0.5);
        assert!((expected_exponent(&ap, 6.0, 4.0) - 2.0 / 3.0).abs() < 1e-15);
        let post = RuleSpec::Aposteriori { xi: 2.0f64, sigma: None };
        assert!((expected_exponent(&post, 1.0, 4.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((expected_exponent(&post, 3.0, 4.0) - 0.5).abs() < 1e-15);
        let b2 = RuleSpec::Aposteriori { xi: 1.5f64, sigma: Some(0.5) };
        assert!((expected_exponent(&b2, 2.0, 2.0) - 0.25).abs() < 1e-15);
    }

    fn spec(rule: RuleSpec<f64>, p: f64, b: f64) -> ExperimentSpec<f64> {
        ExperimentSpec {
            domain: Arc::new(SpectralDomain::interval(1.0, 128).unwrap()),
            profile: Arc::new(TemporalProfile::constant(1.0, 1.0).unwrap()),
            source: SourceSpec::DecayLaw { q: 0.5 },
            class: SmoothnessClass::new(p, 1.0).unwrap(),
            b,
            deltas: (0..6).map(|k| 10f64.powi(-2 - k)).collect(),
            rule,
            seed: 11,
            trials: 3,
        }
    }

    #[test]
    fn apriori_experiment_passes_and_is_reproducible() {
        let s = spec(RuleSpec::Apriori, 2.0, 4.0);
        let a = run_rate_experiment(&s).unwrap();
        let b = run_rate_experiment(&s).unwrap();
        assert!(a.verdict.pass, "{:?}", a.verdict);
        assert_eq!(a.points, b.points);
        assert_eq!(a.fit, b.fit);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = spec(RuleSpec::Apriori, 2.0, 4.0);
        s.deltas = vec![1e-3, 1e-2];
        assert!(s.validate().is_err());
        let mut s = spec(RuleSpec::Apriori, 2.0, 4.0);
        s.trials = 0;
        assert!(s.validate().is_err());
        let mut s = spec(RuleSpec::Apriori, 2.0, 4.0);
        s.source = SourceSpec::Coefficients { values: vec![1.0; 128] };
        assert!(s.validate().is_err());
    }
}
