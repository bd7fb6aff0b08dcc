//! Strict JSON configuration. Unknown fields are rejected and parse errors
//! carry the field path plus line and column.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use qrm_core::harness::{ExperimentSpec, ModulusConvention, RuleSpec, SourceSpec};
use qrm_core::qrm::{ChoiceRule, RegularizerConfig};
use qrm_core::temporal::{BoundProvenance, TrigPiece};
use qrm_core::{SmoothnessClass, SpectralDomain, TemporalProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: DomainConfig,
    pub profile: ProfileConfig,
    #[serde(default)]
    pub source: Option<SourceConfig>,
    #[serde(default)]
    pub regularizer: Option<RegularizerBlock>,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub modulus: Option<ModulusBlock>,
    #[serde(default)]
    pub illposed: Option<IllposedBlock>,
    #[serde(default)]
    pub morozov: Option<MorozovBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Side lengths; one entry per space dimension.
    pub lengths: Vec<f64>,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub horizon: f64,
    pub shape: ShapeConfig,
    /// Bound on `|ψ'|`; computed from the shape when absent.
    #[serde(default)]
    pub kappa2: Option<Kappa2Config>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ShapeConfig {
    Constant { value: f64 },
    Polynomial { coeffs: Vec<f64> },
    PiecewiseTrig { pieces: Vec<TrigPieceConfig> },
    Tabulated { samples: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPieceConfig {
    pub start: f64,
    pub end: f64,
    #[serde(default)]
    pub cos_amp: f64,
    #[serde(default)]
    pub sin_amp: f64,
    pub freq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kappa2Config {
    pub value: f64,
    pub provenance: BoundProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub p: f64,
    pub rho: f64,
    pub law: LawConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum LawConfig {
    DecayLaw { q: f64 },
    Coefficients { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerBlock {
    pub b: f64,
    pub choice: ChoiceConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "rule", rename_all = "snake_case")]
pub enum ChoiceConfig {
    Manual {
        alpha: f64,
    },
    Apriori,
    Aposteriori {
        xi: f64,
        #[serde(default)]
        sigma: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    #[serde(default)]
    pub deltas: Vec<f64>,
    /// Noise level for single inversions.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusBlock {
    pub r: f64,
    pub p: f64,
    /// Leading modes of the operator fed to the oracle (at most 16).
    pub modes: usize,
    #[serde(default = "default_convention")]
    pub convention: ModulusConvention,
    #[serde(default = "default_off_spectrum")]
    pub off_spectrum: usize,
}

fn default_convention() -> ModulusConvention {
    ModulusConvention::Centered
}

fn default_off_spectrum() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IllposedBlock {
    pub k_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorozovBlock {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub points: usize,
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TRIALS: usize = 10;

impl Config {
    pub fn from_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            anyhow!("invalid config at `{}` (line {}, column {}): {}", path, inner.line(), inner.column(), inner)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn seed(&self) -> u64 {
        self.experiment.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn domain(&self) -> Result<Arc<SpectralDomain<f64>>> {
        Ok(Arc::new(SpectralDomain::new(self.domain.lengths.clone(), self.domain.modes)?))
    }

    pub fn profile(&self) -> Result<Arc<TemporalProfile<f64>>> {
        let h = self.profile.horizon;
        let p = match &self.profile.shape {
            ShapeConfig::Constant { value } => TemporalProfile::constant(h, *value)?,
            ShapeConfig::Polynomial { coeffs } => TemporalProfile::polynomial(h, coeffs.clone())?,
            ShapeConfig::PiecewiseTrig { pieces } => TemporalProfile::piecewise_trig(
                h,
                pieces
                    .iter()
                    .map(|p| TrigPiece { start: p.start, end: p.end, cos_amp: p.cos_amp, sin_amp: p.sin_amp, freq: p.freq })
                    .collect(),
            )?,
            ShapeConfig::Tabulated { samples } => {
                let last = samples.last().map(|s| s[0]);
                if last != Some(h) {
                    bail!("tabulated samples must end at the horizon {}", h);
                }
                TemporalProfile::tabulated(samples.iter().map(|s| (s[0], s[1])).collect())?
            }
        };
        let p = match self.profile.kappa2 {
            Some(k) => p.with_derivative_bound(k.value, k.provenance)?,
            None => p,
        };
        Ok(Arc::new(p))
    }

    pub fn source(&self) -> Result<&SourceConfig> {
        self.source.as_ref().ok_or_else(|| anyhow!("config needs a `source` block"))
    }

    pub fn class(&self) -> Result<SmoothnessClass<f64>> {
        let s = self.source()?;
        Ok(SmoothnessClass::new(s.p, s.rho)?)
    }

    pub fn source_spec(&self) -> Result<SourceSpec<f64>> {
        Ok(match &self.source()?.law {
            LawConfig::DecayLaw { q } => SourceSpec::DecayLaw { q: *q },
            LawConfig::Coefficients { values } => SourceSpec::Coefficients { values: values.clone() },
        })
    }

    pub fn regularizer(&self) -> Result<RegularizerBlock> {
        self.regularizer.ok_or_else(|| anyhow!("config needs a `regularizer` block"))
    }

    pub fn rule_spec(&self) -> Result<RuleSpec<f64>> {
        match self.regularizer()?.choice {
            ChoiceConfig::Apriori => Ok(RuleSpec::Apriori),
            ChoiceConfig::Aposteriori { xi, sigma } => Ok(RuleSpec::Aposteriori { xi, sigma }),
            ChoiceConfig::Manual { .. } => bail!("experiments need an apriori or aposteriori rule, not manual"),
        }
    }

    /// Manual `α` configuration, if the rule is manual.
    pub fn manual_config(&self) -> Result<Option<RegularizerConfig<f64>>> {
        let r = self.regularizer()?;
        match r.choice {
            ChoiceConfig::Manual { alpha } => Ok(Some(RegularizerConfig::new(r.b, alpha, ChoiceRule::Manual)?)),
            _ => Ok(None),
        }
    }

    pub fn experiment_spec(&self) -> Result<ExperimentSpec<f64>> {
        if self.experiment.deltas.is_empty() {
            bail!("config needs `experiment.deltas`");
        }
        let spec = ExperimentSpec {
            domain: self.domain()?,
            profile: self.profile()?,
            source: self.source_spec()?,
            class: self.class()?,
            b: self.regularizer()?.b,
            deltas: self.experiment.deltas.clone(),
            rule: self.rule_spec()?,
            seed: self.seed(),
            trials: self.experiment.trials.unwrap_or(DEFAULT_TRIALS),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "domain": {"lengths": [1.0], "modes": 16},
        "profile": {"horizon": 1.0, "shape": {"kind": "constant", "value": 1.0}}
    }"#;

    #[test]
    fn minimal_config_parses() {
        let c = Config::from_str(MINIMAL).unwrap();
        assert_eq!(c.domain.modes, 16);
        assert!(c.source.is_none());
        assert_eq!(c.seed(), DEFAULT_SEED);
        assert_eq!(c.profile().unwrap().sup_norm(), 1.0);
    }

    #[test]
    fn unknown_field_reports_path() {
        let bad = MINIMAL.replace("\"modes\": 16", "\"modes\": 16, \"mdoes\": 3");
        let err = format!("{:#}", Config::from_str(&bad).unwrap_err());
        assert!(err.contains("domain"), "{}", err);
        assert!(err.contains("mdoes"), "{}", err);
        assert!(err.contains("line"), "{}", err);
    }

    #[test]
    fn missing_blocks_are_reported() {
        let c = Config::from_str(MINIMAL).unwrap();
        assert!(c.class().is_err());
        assert!(c.experiment_spec().is_err());
    }
}
