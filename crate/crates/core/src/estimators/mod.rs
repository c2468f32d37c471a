//! Cross-fitted estimators of `theta(h) = P(Y_{h+1}(d) = 1)`, the
//! cumulative incidence of the event of interest by `h + 1` when the
//! policy is applied at times `1..=h` and nobody is lost to follow-up.
//!
//! Both estimators walk backwards from the horizon. At each `t` a
//! pseudo-outcome is regressed on `(A_t, H_t)` among units with
//! `C_t = R_t = 1`, and the fit is evaluated at the observed and at the
//! intervened exposure:
//!
//! * [`sdr_estimate`] uses the influence-function transform `phi_t` as
//!   the next pseudo-outcome, which makes the estimator sequentially
//!   doubly robust;
//! * [`tmle_estimate`] regresses the plain plug-in pseudo-outcome and
//!   tilts each fit with a weighted logistic intercept so that the
//!   efficient score equation holds.
//!
//! Inference is Wald-type with `se = sd(phi_1) / sqrt(n)`.

mod sdr;
mod tmle;

use alloc::vec::Vec;
use core::fmt;

use crate::data::{LongitudinalDataset, MarkovLag};
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::learners::{make_folds, Family, FoldAssignment, LearnerLibrary, LearnerSpec};
use crate::linalg::Matrix;
use crate::nuisance::{cross_fit, learner_seed, FoldDiagnostics, TrainingSet, WeightConfig, WeightFit, WeightSource};
use crate::policy::{intervened_exposure, Policy, Randomizer};
use crate::stats::{normal_quantile, variance};

pub use sdr::sdr_estimate;
pub use tmle::tmle_estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EstimatorKind {
    Sdr,
    Tmle,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Sdr => "sdr",
            EstimatorKind::Tmle => "tmle",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EstimatorConfig {
    /// Candidates for the sequential outcome regressions.
    pub outcome: LearnerLibrary,
    pub weights: WeightConfig,
    /// Number of cross-fitting folds.
    pub folds: usize,
    pub lag: MarkovLag,
    /// Bounding constant of the TMLE outcome scale, in `(0, 0.5)`.
    pub gamma: f64,
    /// Confidence level of the Wald intervals.
    pub level: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            outcome: LearnerLibrary::new(alloc::vec![LearnerSpec::glm(), LearnerSpec::boost()]),
            weights: WeightConfig::default(),
            folds: 10,
            lag: MarkovLag::Unbounded,
            gamma: 0.001,
            level: 0.95,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidArgument(alloc::format!("at least 2 folds are needed, got {}", self.folds)));
        }
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return Err(Error::InvalidArgument(alloc::format!("gamma must lie in (0, 0.5), got {}", self.gamma)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(alloc::format!("level must lie in (0, 1), got {}", self.level)));
        }
        if let MarkovLag::Lag(0) = self.lag {
            return Err(Error::InvalidArgument("markov lag must be at least 1".into()));
        }
        self.outcome.validate()?;
        self.weights.validate()
    }
}

/// Fold choices of the outcome regression at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDiagnostics {
    pub t: usize,
    pub folds: Vec<FoldDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub horizon: usize,
    pub estimator: EstimatorKind,
    pub theta: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Units on study and event-free at the start of the horizon.
    pub n_at_risk: usize,
    /// Largest per-time weight at or before the horizon.
    pub weight_max: f64,
    /// Mean per-time weight over at-risk units, pooled over `t <= horizon`.
    pub weight_mean: f64,
    pub seed: u64,
    /// TMLE only: `mean(phi_1) - theta`.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub score_residual: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub outcome_fits: Vec<OutcomeDiagnostics>,
}

/// Influence-function values of one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EifValues {
    /// `phi_1(Z_i)` per unit.
    pub phi: Vec<f64>,
    /// `pseudo[t - 1][i]` is the pseudo-outcome regressed at time `t`.
    pub pseudo: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub report: EstimateReport,
    pub eif: EifValues,
}

/// `phi_t = w_t (next - q(A_t)) + q(A^d_t)`, equal to `q(A^d_t)` wherever
/// the weight vanishes.
pub fn eif_transform(weights: &[f64], next: &[f64], q_observed: &[f64], q_policy: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .zip(next)
        .zip(q_observed.iter().zip(q_policy))
        .map(|((&w, &y), (&q, &qd))| if w == 0.0 { qd } else { w * (y - q) + qd })
        .collect()
}

/// Inputs shared by every horizon of one analysis: the data, the policy,
/// the cached randomizer draws and the fitted weights with their folds.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    pub data: &'a LongitudinalDataset,
    pub policy: &'a dyn Policy,
    pub config: EstimatorConfig,
    pub randomizer: Randomizer,
    pub weights: WeightFit,
    pub seed: u64,
}

impl<'a> Prepared<'a> {
    /// Draws folds (stratified on the final outcome), caches the
    /// randomizer and fits weights up to `max_horizon`.
    pub fn new(
        data: &'a LongitudinalDataset,
        policy: &'a dyn Policy,
        config: &EstimatorConfig,
        source: WeightSource<'_>,
        max_horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        policy.check_kind(data.exposure_kind())?;
        let strata: Vec<u64> = data.final_outcome().iter().map(|&y| u64::from(y)).collect();
        let folds = make_folds(data.n(), config.folds, Some(&strata), seed)?;
        Self::with_folds(data, policy, config, source, &folds, max_horizon, seed)
    }

    pub fn with_folds(
        data: &'a LongitudinalDataset,
        policy: &'a dyn Policy,
        config: &EstimatorConfig,
        source: WeightSource<'_>,
        folds: &FoldAssignment,
        max_horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let randomizer = Randomizer::new(seed, data.n(), data.tau());
        let weights = WeightFit::fit(data, policy, &randomizer, folds, &config.weights, config.lag, source, max_horizon, seed)?;
        Ok(Self { data, policy, config: config.clone(), randomizer, weights, seed })
    }

    /// Same inputs with the weights replaced.
    pub fn with_weights(&self, weights: WeightFit) -> Self {
        Self { weights, ..self.clone() }
    }

    pub fn estimate(&self, kind: EstimatorKind, horizon: usize) -> Result<Estimate> {
        match kind {
            EstimatorKind::Sdr => sdr_estimate(self, horizon),
            EstimatorKind::Tmle => tmle_estimate(self, horizon),
        }
    }

    fn check_horizon(&self, horizon: usize) -> Result<()> {
        if horizon == 0 || horizon > self.data.tau() {
            return Err(Error::TimeOutOfRange { t: horizon, tau: self.data.tau() });
        }
        self.weights.require(horizon)
    }

    /// Cross-fitted regression of `response` at `t`, trained on rows with
    /// `C_t = R_t = 1` and evaluated for every unit at risk at `t` at the
    /// observed and at the intervened exposure.
    fn regress(&self, t: usize, horizon: usize, response: &[f64], family: Family) -> Result<(Vec<f64>, Vec<f64>, OutcomeDiagnostics)> {
        let data = self.data;
        let n = data.n();
        let rows: Vec<bool> = (0..n).map(|i| data.in_regression(i, t)).collect();
        if !rows.iter().any(|&b| b) {
            return Err(Error::EmptyRiskSet { t });
        }
        let at_risk: Vec<bool> = (0..n).map(|i| data.at_risk(i, t)).collect();
        let lag = self.config.lag;
        let x = data.design(t, lag, data.exposure(t));
        let xd = if self.policy.is_identity() {
            x.clone()
        } else {
            data.design(t, lag, &intervened_exposure(data, self.policy, t, &self.randomizer)?)
        };
        let folds = &self.weights.folds;
        let seed = learner_seed(self.seed, 3, t, horizon);
        let (mut preds, diags) = cross_fit(t, folds, &at_risk, &[&x, &xd], &self.config.outcome, family, seed, |k| {
            let train: Vec<usize> = (0..n).filter(|&i| rows[i] && folds.fold_of(i) != k).collect();
            if train.is_empty() {
                return Err(Error::EmptyRiskSet { t });
            }
            Ok(TrainingSet { x: x.select_rows(&train), y: train.iter().map(|&i| response[i]).collect(), weights: None })
        })?;
        let q_policy = preds.pop().unwrap_or_default();
        let q_observed = preds.pop().unwrap_or_default();
        Ok((q_observed, q_policy, OutcomeDiagnostics { t, folds: diags }))
    }

    /// Pseudo-outcome carried to `t - 1`: `phi_t` for units at risk at
    /// `t`, and the recorded `Y_t` for the others.
    fn carry(&self, t: usize, phi: &[f64]) -> Vec<f64> {
        let y = self.data.outcome(t);
        (0..self.data.n()).map(|i| if self.data.at_risk(i, t) { phi[i] } else { f64::from(y[i]) }).collect()
    }

    fn report(&self, kind: EstimatorKind, horizon: usize, theta: f64, phi: &[f64]) -> EstimateReport {
        let n = phi.len() as f64;
        let se = if phi.len() > 1 { libm::sqrt(variance(phi) / n) } else { 0.0 };
        let z = normal_quantile(0.5 + self.config.level / 2.0);
        let diags = &self.weights.diagnostics()[..horizon];
        let weight_max = diags.iter().map(|d| d.weight_max).fold(0.0, f64::max);
        let total: usize = diags.iter().map(|d| d.at_risk).sum();
        let weight_mean = if total == 0 {
            0.0
        } else {
            diags.iter().map(|d| d.weight_mean * d.at_risk as f64).sum::<f64>() / total as f64
        };
        EstimateReport {
            horizon,
            estimator: kind,
            theta,
            se,
            ci_low: theta - z * se,
            ci_high: theta + z * se,
            n_at_risk: (0..self.data.n()).filter(|&i| self.data.at_risk(i, horizon)).count(),
            weight_max,
            weight_mean,
            seed: self.seed,
            score_residual: None,
            outcome_fits: Vec::new(),
        }
    }
}

/// Result at one horizon of a curve; failures are kept per horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub horizon: usize,
    pub result: Result<Estimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveEstimate {
    pub points: Vec<CurvePoint>,
}

impl CurveEstimate {
    pub fn estimates(&self) -> Vec<&Estimate> {
        self.points.iter().filter_map(|p| p.result.as_ref().ok()).collect()
    }

    pub fn failures(&self) -> Vec<(usize, &Error)> {
        self.points.iter().filter_map(|p| p.result.as_ref().err().map(|e| (p.horizon, e))).collect()
    }

    /// `n x K` matrix of `phi_1` for the `K` successful horizons.
    pub fn eif_matrix(&self) -> Matrix {
        let est = self.estimates();
        let n = est.first().map_or(0, |e| e.eif.phi.len());
        let mut m = Matrix::zeros(n, est.len());
        for (k, e) in est.iter().enumerate() {
            for (i, v) in e.eif.phi.iter().enumerate() {
                m.set(i, k, *v);
            }
        }
        m
    }
}

/// One estimate per horizon, sharing folds, randomizer and weights.
/// Horizons run concurrently under the `parallel` feature.
pub fn estimate_curve(prepared: &Prepared<'_>, kind: EstimatorKind, horizons: &[usize]) -> CurveEstimate {
    let points = map_range(horizons.len(), |k| CurvePoint { horizon: horizons[k], result: prepared.estimate(kind, horizons[k]) });
    CurveEstimate { points }
}
