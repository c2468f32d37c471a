//! Run configuration: a JSON file whose fields can be overridden from
//! the command line. Every numeric range is checked before any compute.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lmtp_core::data::{ExposureKind, MarkovLag};
use lmtp_core::estimators::{EstimatorConfig, EstimatorKind};
use lmtp_core::learners::{LearnerLibrary, LearnerSpec};
use lmtp_core::nuisance::WeightConfig;
use lmtp_core::postprocess::DEFAULT_MULTIPLIERS;
use serde::{Deserialize, Serialize};

use crate::policy_spec::PolicySpec;

/// `"all"` or an explicit list of horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Horizons {
    List(Vec<usize>),
    Keyword(String),
}

impl Default for Horizons {
    fn default() -> Self {
        Horizons::Keyword("all".into())
    }
}

impl Horizons {
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(Horizons::default());
        }
        let list = s.split(',').map(|v| v.trim().parse::<usize>().with_context(|| format!("bad horizon `{v}`"))).collect::<Result<Vec<_>>>()?;
        Ok(Horizons::List(list))
    }

    /// Sorted, de-duplicated horizons within `1..=tau`.
    pub fn resolve(&self, tau: usize) -> Result<Vec<usize>> {
        match self {
            Horizons::Keyword(k) if k == "all" => Ok((1..=tau).collect()),
            Horizons::Keyword(k) => bail!("horizons must be \"all\" or a list, got `{k}`"),
            Horizons::List(list) => {
                let mut v = list.clone();
                v.sort_unstable();
                v.dedup();
                if v.is_empty() {
                    bail!("empty horizon list");
                }
                if let Some(h) = v.iter().find(|&&h| h == 0 || h > tau) {
                    bail!("horizon {h} outside 1..={tau}");
                }
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub outcome: Vec<LearnerSpec>,
    pub censoring: Vec<LearnerSpec>,
    pub ratio: Vec<LearnerSpec>,
    pub inner_folds: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        let core = EstimatorConfig::default();
        Self {
            outcome: core.outcome.candidates,
            censoring: core.weights.censoring.candidates,
            ratio: core.weights.ratio.candidates,
            inner_folds: core.outcome.inner_folds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldConfig {
    #[serde(rename = "J")]
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioConfig {
    pub c_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensoringConfig {
    pub g_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    #[serde(rename = "B")]
    pub b: usize,
    pub level: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self { b: DEFAULT_MULTIPLIERS, level: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmleConfig {
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub horizons: Horizons,
    pub policy: PolicySpec,
    /// Second arm for a contrast curve (`policy` minus `reference`).
    pub reference: Option<PolicySpec>,
    /// Exposure kind; inferred from the data when absent.
    pub exposure: Option<ExposureKind>,
    pub learners: LearnerConfig,
    pub folds: FoldConfig,
    /// Number of past time blocks kept in the regressions; all when absent.
    pub markov_lag: Option<usize>,
    pub ratio: RatioConfig,
    pub censoring: CensoringConfig,
    pub band: BandConfig,
    pub tmle: TmleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let core = EstimatorConfig::default();
        Self {
            input: None,
            out: None,
            seed: 1,
            estimator: EstimatorKind::Sdr,
            horizons: Horizons::default(),
            policy: PolicySpec::Identity,
            reference: None,
            exposure: None,
            learners: LearnerConfig::default(),
            folds: FoldConfig { j: core.folds },
            markov_lag: None,
            ratio: RatioConfig { c_max: core.weights.c_max },
            censoring: CensoringConfig { g_floor: core.weights.g_floor },
            band: BandConfig::default(),
            tmle: TmleConfig { gamma: core.gamma },
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config `{}`", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config `{}`", path.display()))
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        let library = |c: &[LearnerSpec]| LearnerLibrary { candidates: c.to_vec(), inner_folds: self.learners.inner_folds };
        EstimatorConfig {
            outcome: library(&self.learners.outcome),
            weights: WeightConfig {
                censoring: library(&self.learners.censoring),
                ratio: library(&self.learners.ratio),
                g_floor: self.censoring.g_floor,
                c_max: self.ratio.c_max,
            },
            folds: self.folds.j,
            lag: self.markov_lag.map_or(MarkovLag::Unbounded, MarkovLag::Lag),
            gamma: self.tmle.gamma,
            level: self.band.level,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.estimator_config().validate()?;
        if self.band.b == 0 {
            bail!("band.B must be positive");
        }
        if let Some(input) = &self.input {
            if !input.is_file() {
                bail!("input file `{}` does not exist", input.display());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        let partial: RunConfig = serde_json::from_str(r#"{"seed": 4, "folds": {"J": 5}, "horizons": [2, 1]}"#).unwrap();
        assert_eq!(partial.seed, 4);
        assert_eq!(partial.horizons.resolve(3).unwrap(), vec![1, 2]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 4}"#).is_err());
    }

    #[test]
    fn horizon_forms() {
        assert_eq!(Horizons::parse("all").unwrap().resolve(3).unwrap(), vec![1, 2, 3]);
        assert_eq!(Horizons::parse("3,1").unwrap().resolve(3).unwrap(), vec![1, 3]);
        assert!(Horizons::parse("4").unwrap().resolve(3).is_err());
        assert!(Horizons::parse("x").is_err());
    }

    #[test]
    fn range_checks() {
        let mut c = RunConfig::default();
        c.censoring.g_floor = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.folds.j = 1;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.input = Some(PathBuf::from("/nonexistent/data.csv"));
        assert!(c.validate().is_err());
    }
}
