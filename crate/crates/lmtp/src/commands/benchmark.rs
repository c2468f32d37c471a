//! Replicated estimation on simulated data against the exact truth.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use lmtp_core::estimators::{EstimatorConfig, EstimatorKind, Prepared};
use lmtp_core::learners::{LearnerLibrary, LearnerSpec};
use lmtp_core::nuisance::WeightSource;
use lmtp_core::oracle::{exhaustive_truth, simulate_observed, DgpSpec};
use lmtp_core::policy::Policy;
use lmtp_core::rng::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create_dir, read_spec};
use crate::error::{CliError, CliResult, Classify};
use crate::policy_spec::PolicySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Learned,
    /// Exact exposure and censoring laws of the spec.
    Oracle,
}

/// One nuisance configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arm {
    pub name: String,
    pub outcome: Vec<LearnerSpec>,
    #[serde(default = "default_weight_learners")]
    pub censoring: Vec<LearnerSpec>,
    #[serde(default = "default_weight_learners")]
    pub ratio: Vec<LearnerSpec>,
    #[serde(default = "default_mode")]
    pub weights: WeightMode,
    /// Multiplies every weight before truncation.
    #[serde(default = "one")]
    pub weight_scale: f64,
}

fn default_weight_learners() -> Vec<LearnerSpec> {
    vec![LearnerSpec::glm()]
}

fn default_mode() -> WeightMode {
    WeightMode::Learned
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub spec: PathBuf,
    pub policy: PolicySpec,
    /// Intervention horizon; the spec's `tau` when absent.
    #[serde(default)]
    pub horizon: Option<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub n: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "seed_one")]
    pub seed: u64,
    #[serde(default = "ten")]
    pub folds: usize,
    pub arms: Vec<Arm>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn seed_one() -> u64 {
    1
}

fn ten() -> usize {
    10
}

/// Summary of one (arm, estimator, n) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub arm: String,
    pub estimator: EstimatorKind,
    pub n: usize,
    pub horizon: usize,
    pub replicates: usize,
    pub failures: usize,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    /// `sd / sqrt(replicates)`: the Monte Carlo error of `bias`.
    pub bias_se: f64,
    pub mean_se: f64,
    pub coverage: f64,
}

impl BenchmarkConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read `{}`", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid benchmark config `{}`", path.display()))
    }

    fn check(&self) -> anyhow::Result<()> {
        if self.replicates == 0 {
            bail!("replicates must be positive");
        }
        if self.n.is_empty() || self.n.contains(&0) {
            bail!("n grid must be non-empty and positive");
        }
        if self.estimators.is_empty() || self.arms.is_empty() {
            bail!("at least one estimator and one arm are required");
        }
        if let Some(a) = self.arms.iter().find(|a| !(a.weight_scale > 0.0 && a.weight_scale.is_finite())) {
            bail!("arm `{}`: weight_scale must be positive", a.name);
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
/// One replicate: per estimator, `(theta, se)` or `None` on failure.
fn replicate(spec: &DgpSpec, policy: &dyn Policy, arm: &Arm, estimators: &[EstimatorKind], folds: usize, n: usize, horizon: usize, seed: u64) -> Vec<Option<(f64, f64)>> {
    let mut config = EstimatorConfig { outcome: LearnerLibrary::new(arm.outcome.clone()), folds, ..EstimatorConfig::default() };
    config.weights.censoring = LearnerLibrary::new(arm.censoring.clone());
    config.weights.ratio = LearnerLibrary::new(arm.ratio.clone());
    let run = || -> lmtp_core::Result<Vec<Option<(f64, f64)>>> {
        let data = simulate_observed(spec, n, seed)?;
        let source = match arm.weights {
            WeightMode::Learned => WeightSource::Learned,
            WeightMode::Oracle => WeightSource::Oracle(spec),
        };
        let mut prepared = Prepared::new(&data, policy, &config, source, horizon, seed)?;
        if arm.weight_scale != 1.0 {
            prepared = prepared.with_weights(prepared.weights.scaled(arm.weight_scale));
        }
        Ok(estimators
            .iter()
            .map(|&k| match prepared.estimate(k, horizon) {
                Ok(e) => Some((e.report.theta, e.report.se)),
                Err(e) => {
                    log::warn!("arm {} n={n} seed={seed} {k}: {e}", arm.name);
                    None
                }
            })
            .collect())
    };
    run().unwrap_or_else(|e| {
        log::warn!("arm {} n={n} seed={seed}: {e}", arm.name);
        vec![None; estimators.len()]
    })
}

/// Runs every cell and returns the summaries in (n, arm, estimator) order.
pub fn summarize(config: &BenchmarkConfig, base: &Path) -> CliResult<Vec<CellSummary>> {
    config.check().input()?;
    let spec = read_spec(&base.join(&config.spec))?;
    if !spec.is_discrete() {
        return Err(CliError::input(anyhow!("benchmark needs a fully discrete spec for the exact truth")));
    }
    let policy = config.policy.build(base).input()?;
    let horizon = config.horizon.unwrap_or(spec.tau);
    let truth = exhaustive_truth(&spec, policy.as_ref(), horizon).input()?.theta;
    let z = lmtp_core::stats::normal_quantile(0.975);
    let mut out = Vec::new();
    for &n in &config.n {
        for arm in &config.arms {
            // Replicate r uses the same data in every arm and estimator.
            let results: Vec<Vec<Option<(f64, f64)>>> = (0..config.replicates)
                .into_par_iter()
                .map(|r| replicate(&spec, policy.as_ref(), arm, &config.estimators, config.folds, n, horizon, derive_seed(config.seed, (n as u64) << 20 | r as u64)))
                .collect();
            for (k, &estimator) in config.estimators.iter().enumerate() {
                let ok: Vec<(f64, f64)> = results.iter().filter_map(|r| r[k]).collect();
                let m = ok.len() as f64;
                let mean = ok.iter().map(|p| p.0).sum::<f64>() / m;
                let sd = if ok.len() > 1 { (ok.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt() } else { f64::NAN };
                let mean_se = ok.iter().map(|p| p.1).sum::<f64>() / m;
                let covered = ok.iter().filter(|(t, s)| (t - truth).abs() <= z * s).count() as f64;
                out.push(CellSummary {
                    arm: arm.name.clone(),
                    estimator,
                    n,
                    horizon,
                    replicates: ok.len(),
                    failures: config.replicates - ok.len(),
                    truth,
                    mean,
                    bias: mean - truth,
                    sd,
                    bias_se: sd / m.sqrt(),
                    mean_se,
                    coverage: covered / m,
                });
            }
        }
    }
    Ok(out)
}

/// Writes `summary.csv` into the configured or given output directory.
pub fn run(config: &BenchmarkConfig, base: &Path, out: &Path) -> CliResult<Vec<CellSummary>> {
    let cells = summarize(config, base)?;
    create_dir(out)?;
    let mut w = csv::Writer::from_path(out.join("summary.csv")).input()?;
    for c in &cells {
        w.serialize(c).input()?;
    }
    w.flush().input()?;
    for c in &cells {
        log::info!(
            "{} {} n={}: bias={:.5} sd={:.5} coverage={:.3} failures={}",
            c.arm, c.estimator, c.n, c.bias, c.sd, c.coverage, c.failures
        );
    }
    Ok(cells)
}
