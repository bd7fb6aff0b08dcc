use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use serde::{Deserialize, Serialize};

use qrm_core::forward::IllposednessRow;
use qrm_core::harness::{
    add_noise, modulus_bounds, modulus_closed_form, modulus_oracle, optimality_check, run_rate_experiment, ModulusConvention,
    ModulusQuery, OptimalityReport, OptimalitySpec, RateReport, RuleSpec, SubCase, PointStatus,
};
use qrm_core::qrm::{bias_bound, discrepancy, morozov_target, noise_bound, ChoiceRule, Diagnostics, RegularizerConfig, MOROZOV_REL_TOL};
use qrm_core::temporal::{check_assumption, AdmissibilityReport};
use qrm_core::{ForwardOperator, QrmSolver, SpectralCoefficients};

use crate::config::{ChoiceConfig, Config, DEFAULT_SEED};
use crate::output::{fmt_f64, fmt_opt, Artifacts};

/// Growth ratios may land one ulp below 1.
pub const GROWTH_RATIO_TOL: f64 = 1e-14;
pub const DEFAULT_SAMPLES: usize = 64;

pub struct CommandOutput {
    pub artifacts: Artifacts,
    pub summary: String,
    /// Set when the computation ran but a theorem-level check failed.
    pub violation: Option<String>,
}

fn operator(cfg: &Config) -> Result<Arc<ForwardOperator<f64>>> {
    Ok(Arc::new(ForwardOperator::new(cfg.domain()?, cfg.profile()?)?))
}

fn source_field(cfg: &Config) -> Result<SpectralCoefficients<f64>> {
    let spec = qrm_core::harness::ExperimentSpec {
        domain: cfg.domain()?,
        profile: cfg.profile()?,
        source: cfg.source_spec()?,
        class: cfg.class()?,
        b: 2.0,
        deltas: vec![1.0],
        rule: RuleSpec::Apriori,
        seed: DEFAULT_SEED,
        trials: 1,
    };
    let f = spec.source_field()?;
    if !f.in_source_set(&spec.class) {
        bail!("source lies outside the smoothness class (p = {}, rho = {})", spec.class.p, spec.class.rho);
    }
    Ok(f)
}

pub fn check_psi(cfg: &Config) -> Result<CommandOutput> {
    let domain = cfg.domain()?;
    let profile = cfg.profile()?;
    let report = check_assumption(&profile, domain.first_eigenvalue())?;
    let mut artifacts = Artifacts::new();
    artifacts.json("check_psi.json", &report)?;
    let summary = if report.is_admissible() {
        format!(
            "admissible ({:?}): kappa1 = {}, tau0 = {}, C = {}",
            report.case,
            fmt_opt(report.kappa1),
            fmt_opt(report.tau0),
            fmt_opt(report.lower_bound)
        )
    } else {
        format!("inadmissible: {}", report.reason.clone().unwrap_or_default())
    };
    if !report.is_admissible() {
        return Err(anyhow!(Inadmissible { summary, report }));
    }
    Ok(CommandOutput { artifacts, summary, violation: None })
}

/// Raised by `check-psi` for a profile that fails the assumption; maps to exit 1.
#[derive(Debug)]
pub struct Inadmissible {
    pub summary: String,
    pub report: AdmissibilityReport<f64>,
}

impl std::fmt::Display for Inadmissible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.summary)
    }
}

impl std::error::Error for Inadmissible {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardSummary {
    pub modes: usize,
    pub max_abs_mu: f64,
    pub source_norm: f64,
    pub data_norm: f64,
    pub truncation_tail_bound: f64,
}

pub fn forward(cfg: &Config) -> Result<CommandOutput> {
    let op = operator(cfg)?;
    let f = source_field(cfg)?;
    let h = op.apply_t(&f)?;
    let rows: Vec<Vec<String>> = op
        .domain()
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| vec![(i + 1).to_string(), fmt_f64(m.lambda), fmt_f64(op.mu()[i]), fmt_f64(f.coeffs()[i]), fmt_f64(h.coeffs()[i])])
        .collect();
    let summary = ForwardSummary {
        modes: op.domain().len(),
        max_abs_mu: op.max_abs_mu(),
        source_norm: f.l2_norm(),
        data_norm: h.l2_norm(),
        truncation_tail_bound: op.truncation_tail_bound(f.l2_norm()),
    };
    let mut artifacts = Artifacts::new();
    artifacts.csv("forward.csv", &["n", "lambda", "mu", "source", "data"], &rows)?;
    artifacts.json("forward.json", &summary)?;
    Ok(CommandOutput {
        artifacts,
        summary: format!("forward: {} modes, ||f|| = {}, ||Tf|| = {}", summary.modes, fmt_f64(summary.source_norm), fmt_f64(summary.data_norm)),
        violation: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertSummary {
    pub delta: f64,
    pub alpha: f64,
    pub error: f64,
    /// Explicit error bound when the rule has one.
    pub bound: Option<f64>,
    pub bias_bound: f64,
    pub diagnostics: Diagnostics<f64>,
}

pub fn invert(cfg: &Config) -> Result<CommandOutput> {
    let op = operator(cfg)?;
    let solver = QrmSolver::new(Arc::clone(&op))?;
    let f = source_field(cfg)?;
    let class = cfg.class()?;
    let reg = cfg.regularizer()?;
    let delta = cfg.experiment.delta.unwrap_or(0.0);
    let h = op.apply_t(&f)?;
    let h_delta = add_noise(&h, delta, cfg.seed())?;
    let rc: RegularizerConfig<f64> = match reg.choice {
        ChoiceConfig::Manual { alpha } => RegularizerConfig::new(reg.b, alpha, ChoiceRule::Manual)?,
        ChoiceConfig::Apriori => {
            let alpha = qrm_core::qrm::apriori_alpha(delta, &class, reg.b)?;
            RegularizerConfig::new(reg.b, alpha, ChoiceRule::Apriori { delta, rho: class.rho, p: class.p })?
        }
        ChoiceConfig::Aposteriori { xi, sigma } => qrm_core::qrm::morozov_select(&h_delta, delta, xi, reg.b, sigma)?,
    };
    let rec = solver.invert(&h_delta, rc)?;
    let error = rec.solution.sub(&f)?.l2_norm();
    let lambda_1 = op.domain().first_eigenvalue();
    let bias = bias_bound(&class, rc.alpha, reg.b, lambda_1);
    let bound = match reg.choice {
        ChoiceConfig::Aposteriori { xi, sigma } => Some(solver.aposteriori_constants(xi, class.p, reg.b).bound(class.rho, delta, class.p, reg.b, sigma)),
        _ => Some(bias + noise_bound(delta, rc.alpha, reg.b, solver.lower_bound_constant())),
    };
    let explicit = !matches!(reg.choice, ChoiceConfig::Aposteriori { .. });
    let violation = match bound {
        Some(b) if explicit && !(error <= b * (1.0 + 1e-12)) => Some(format!("error {} exceeds the bound {}", fmt_f64(error), fmt_f64(b))),
        _ => None,
    };
    let rows: Vec<Vec<String>> = (0..f.coeffs().len())
        .map(|i| {
            vec![
                (i + 1).to_string(),
                fmt_f64(f.coeffs()[i]),
                fmt_f64(h_delta.coeffs()[i]),
                fmt_f64(rec.solution.coeffs()[i]),
            ]
        })
        .collect();
    let summary = InvertSummary { delta, alpha: rc.alpha, error, bound, bias_bound: bias, diagnostics: rec.diagnostics };
    let mut artifacts = Artifacts::new();
    artifacts.csv("invert.csv", &["n", "source", "data", "reconstruction"], &rows)?;
    artifacts.json("invert.json", &summary)?;
    Ok(CommandOutput {
        artifacts,
        summary: format!("invert: alpha = {}, error = {}, bound = {}", fmt_f64(rc.alpha), fmt_f64(error), fmt_opt(bound)),
        violation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorozovSummary {
    pub delta: f64,
    pub target: f64,
    pub alpha: f64,
    pub discrepancy: f64,
    pub relative_residual: f64,
    pub data_norm: f64,
    pub zeta_strictly_increasing: bool,
}

pub fn morozov(cfg: &Config) -> Result<CommandOutput> {
    let op = operator(cfg)?;
    let f = source_field(cfg)?;
    let reg = cfg.regularizer()?;
    let (xi, sigma) = match reg.choice {
        ChoiceConfig::Aposteriori { xi, sigma } => (xi, sigma),
        _ => bail!("morozov needs an aposteriori rule"),
    };
    let delta = cfg.experiment.delta.ok_or_else(|| anyhow!("morozov needs `experiment.delta`"))?;
    let h_delta = add_noise(&op.apply_t(&f)?, delta, cfg.seed())?;
    let grid = cfg.morozov.unwrap_or(crate::config::MorozovBlock { alpha_min: 1e-12, alpha_max: 1e12, points: 50 });
    if grid.points < 2 || !(grid.alpha_min > 0.0 && grid.alpha_max > grid.alpha_min) {
        bail!("morozov grid needs 0 < alpha_min < alpha_max and at least 2 points");
    }
    let ratio = (grid.alpha_max / grid.alpha_min).ln() / (grid.points - 1) as f64;
    let alphas: Vec<f64> = (0..grid.points).map(|k| grid.alpha_min * (ratio * k as f64).exp()).collect();
    let zetas = alphas.iter().map(|a| discrepancy(&h_delta, *a, reg.b)).collect::<qrm_core::Result<Vec<f64>>>()?;
    let increasing = zetas.windows(2).all(|w| w[1] > w[0]);
    let target = morozov_target(delta, xi, reg.b, sigma)?;
    let chosen = qrm_core::qrm::morozov_select(&h_delta, delta, xi, reg.b, sigma)?;
    let zeta = discrepancy(&h_delta, chosen.alpha, reg.b)?;
    let summary = MorozovSummary {
        delta,
        target,
        alpha: chosen.alpha,
        discrepancy: zeta,
        relative_residual: (zeta - target).abs() / target,
        data_norm: h_delta.l2_norm(),
        zeta_strictly_increasing: increasing,
    };
    let violation = if !increasing {
        Some("zeta is not strictly increasing on the grid".to_string())
    } else if summary.relative_residual > MOROZOV_REL_TOL {
        Some(format!("discrepancy residual {} above {}", fmt_f64(summary.relative_residual), MOROZOV_REL_TOL))
    } else {
        None
    };
    let rows: Vec<Vec<String>> = alphas.iter().zip(&zetas).map(|(a, z)| vec![fmt_f64(*a), fmt_f64(*z)]).collect();
    let mut artifacts = Artifacts::new();
    artifacts.csv("morozov.csv", &["alpha", "zeta"], &rows)?;
    artifacts.plot("morozov.dat", &alphas.iter().copied().zip(zetas.iter().copied()).collect::<Vec<_>>());
    artifacts.json("morozov.json", &summary)?;
    Ok(CommandOutput {
        artifacts,
        summary: format!(
            "morozov: alpha = {}, zeta = {}, target = {}, relative residual = {}",
            fmt_f64(summary.alpha),
            fmt_f64(zeta),
            fmt_f64(target),
            fmt_f64(summary.relative_residual)
        ),
        violation,
    })
}

/// Local slope between consecutive used points.
pub fn partial_slopes(report: &RateReport<f64>) -> Vec<Option<f64>> {
    let mut prev: Option<(f64, f64)> = None;
    report
        .points
        .iter()
        .map(|p| {
            if p.status != PointStatus::Used {
                return None;
            }
            let s = prev.map(|(d, e)| (p.mean_error / e).log10() / (p.delta / d).log10());
            prev = Some((p.delta, p.mean_error));
            s
        })
        .collect()
}

pub fn rate(cfg: &Config) -> Result<CommandOutput> {
    let spec = cfg.experiment_spec()?;
    let report = run_rate_experiment(&spec)?;
    let slopes = partial_slopes(&report);
    let rows: Vec<Vec<String>> = report
        .points
        .iter()
        .zip(&slopes)
        .map(|(p, s)| vec![fmt_f64(p.delta), fmt_f64(p.alpha), fmt_f64(p.mean_error), fmt_f64(p.bound), fmt_opt(*s)])
        .collect();
    let plot: Vec<(f64, f64)> = report.points.iter().filter(|p| p.status == PointStatus::Used).map(|p| (p.delta, p.mean_error)).collect();
    let mut artifacts = Artifacts::new();
    artifacts.csv("rate.csv", &["delta", "alpha", "error", "bound", "slope_partial"], &rows)?;
    artifacts.plot("rate.dat", &plot);
    artifacts.json("rate.json", &report)?;
    let summary = format!(
        "rate: fitted slope = {:.4}, expected = {:.4}, verdict = {}",
        report.fit.slope,
        report.expected_exponent,
        if report.verdict.pass { "pass" } else { "fail" }
    );
    let violation = (!report.verdict.pass).then(|| report.verdict.criteria.clone());
    Ok(CommandOutput { artifacts, summary, violation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub delta: f64,
    pub sub_case: SubCase,
    pub closed_form: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub oracle: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusSummary {
    pub convention: ModulusConvention,
    pub r: f64,
    pub p: f64,
    pub mu: Vec<f64>,
    pub max_closed_form_mismatch: f64,
    pub rows: Vec<ModulusRow>,
    pub optimality: Option<OptimalityReport<f64>>,
}

/// Relative agreement required between the oracle and the closed form.
pub const ORACLE_REL_TOL: f64 = 1e-9;

pub fn modulus(cfg: &Config) -> Result<CommandOutput> {
    let block = cfg.modulus.ok_or_else(|| anyhow!("config needs a `modulus` block"))?;
    let mut small = cfg.clone();
    small.domain.modes = block.modes;
    let op = operator(&small)?;
    let mu = op.mu().to_vec();
    let base = ModulusQuery::new(block.r, 0.0, block.p, mu.clone(), block.convention)?;
    let factor = if block.convention == ModulusConvention::Pairwise { 2.0 } else { 1.0 };
    let pw = block.p + 2.0;

    let mut deltas: Vec<f64> = mu.iter().map(|m| factor * block.r * m.abs().powf(pw / 2.0)).collect();
    let d_hi = base.delta_0();
    let smallest = mu.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let d_lo = factor * block.r * smallest.powf(pw / 2.0);
    for k in 0..block.off_spectrum {
        deltas.push(d_lo * (d_hi / d_lo).powf((k as f64 + 0.5) / block.off_spectrum as f64));
    }

    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for d in deltas {
        let q = base.with_delta(d)?;
        let oracle = modulus_oracle(&q)?;
        let closed = modulus_closed_form(&q).ok();
        let (lower, upper, sub_case) = match modulus_bounds(&q) {
            Ok(b) => (b.lower, b.upper, b.sub_case),
            Err(e) => bail!("modulus bounds at delta = {}: {}", d, e),
        };
        let slack = 1.0 + if closed.is_some() { ORACLE_REL_TOL } else { 1e-12 };
        let mut ok = lower <= oracle * slack && oracle <= upper * slack;
        if let Some(c) = closed {
            let mismatch = (oracle - c).abs() / c;
            worst = worst.max(mismatch);
            ok &= mismatch <= ORACLE_REL_TOL;
        }
        rows.push(ModulusRow { delta: d, sub_case, closed_form: closed, lower, upper, oracle, ok });
    }

    let optimality = if cfg.source.is_some() && cfg.regularizer.is_some() && !cfg.experiment.deltas.is_empty() {
        let spec = OptimalitySpec {
            domain: cfg.domain()?,
            profile: cfg.profile()?,
            class: cfg.class()?,
            b: cfg.regularizer()?.b,
            deltas: cfg.experiment.deltas.clone(),
            rule: cfg.rule_spec()?,
            seed: cfg.seed(),
            samples: DEFAULT_SAMPLES,
        };
        Some(optimality_check(&spec)?)
    } else {
        None
    };

    let mut artifacts = Artifacts::new();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.delta),
                matches!(r.sub_case, SubCase::Membership(_)).to_string(),
                fmt_opt(r.closed_form),
                fmt_f64(r.lower),
                fmt_f64(r.upper),
                fmt_f64(r.oracle),
            ]
        })
        .collect();
    artifacts.csv("modulus.csv", &["delta", "membership", "closed_form", "lower", "upper", "oracle"], &csv_rows)?;
    if let Some(opt) = &optimality {
        let o_rows: Vec<Vec<String>> = opt
            .rows
            .iter()
            .map(|r| vec![fmt_f64(r.delta), fmt_f64(r.worst_error), fmt_f64(r.omega_lower), fmt_f64(r.omega_upper), fmt_f64(r.ratio)])
            .collect();
        artifacts.csv("optimality.csv", &["delta", "worst_error", "omega_lower", "omega_upper", "ratio"], &o_rows)?;
    }
    let all_ok = rows.iter().all(|r| r.ok) && optimality.as_ref().is_none_or(|o| o.pass);
    let summary = ModulusSummary {
        convention: block.convention,
        r: block.r,
        p: block.p,
        mu,
        max_closed_form_mismatch: worst,
        rows,
        optimality,
    };
    artifacts.json("modulus.json", &summary)?;
    let mut line = format!(
        "modulus ({:?}): closed form vs oracle max relative mismatch = {}, bounds hold = {}",
        block.convention,
        fmt_f64(worst),
        summary.rows.iter().all(|r| r.ok)
    );
    if let Some(o) = &summary.optimality {
        let (lo, hi) = o.rows.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(r.ratio), h.max(r.ratio)));
        line.push_str(&format!("; optimality ratio in [{:.4}, {:.4}], band [{}, {:.4}]", lo, hi, o.band[0], o.band[1]));
    }
    Ok(CommandOutput {
        artifacts,
        summary: line,
        violation: (!all_ok).then(|| "modulus checks failed".to_string()),
    })
}

pub fn illposed(cfg: &Config) -> Result<CommandOutput> {
    let op = operator(cfg)?;
    let k_max = cfg.illposed.map(|b| b.k_max).unwrap_or(op.domain().len().min(64));
    let table: Vec<IllposednessRow<f64>> = op.illposedness_demo(k_max)?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| vec![r.k.to_string(), fmt_f64(r.lambda), fmt_f64(r.data_norm), fmt_f64(r.preimage_norm), fmt_f64(r.growth_ratio)])
        .collect();
    let bad: Vec<usize> = table.iter().filter(|r| r.growth_ratio < 1.0 - GROWTH_RATIO_TOL).map(|r| r.k).collect();
    let decreasing = table.windows(2).all(|w| w[1].data_norm < w[0].data_norm);
    let mut artifacts = Artifacts::new();
    artifacts.csv("illposed.csv", &["k", "lambda", "data_norm", "preimage_norm", "growth_ratio"], &rows)?;
    artifacts.plot("illposed.dat", &table.iter().map(|r| (r.k as f64, r.preimage_norm)).collect::<Vec<_>>());
    artifacts.json("illposed.json", &table)?;
    let last = table.last().expect("k_max >= 1");
    let violation = if !bad.is_empty() {
        Some(format!("growth ratio below 1 at k = {:?}", bad))
    } else if !decreasing {
        Some("data norms are not decreasing".to_string())
    } else {
        None
    };
    Ok(CommandOutput {
        artifacts,
        summary: format!(
            "illposed: k = {}, ||h_k|| = {}, ||f_k|| = {}, min growth ratio = {}",
            last.k,
            fmt_f64(last.data_norm),
            fmt_f64(last.preimage_norm),
            fmt_f64(table.iter().fold(f64::INFINITY, |m, r| m.min(r.growth_ratio)))
        ),
        violation,
    })
}
