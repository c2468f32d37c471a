//! Cross-fitted censoring probabilities, density ratios and the weights
//! `w_t = r_t * c_t * R_t / g_{C,t}` built from them.
//!
//! Every prediction for unit `i` comes from a model whose training rows
//! exclude the fold of `i`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{History, LongitudinalDataset, MarkovLag};
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::learners::{select_learner, CandidateRisk, Family, FoldAssignment, LearnerLibrary, LearnerSpec};
use crate::linalg::Matrix;
use crate::policy::{discrete_post_intervention_pmf, intervened_exposure, Policy, Randomizer};
use crate::rng::{derive_seed, tag};

/// Known nuisance laws, for oracle-mode weights.
pub trait NuisanceOracle: Sync {
    /// Natural exposure pmf over `0..K` at time `h.time()`.
    fn exposure_pmf(&self, h: &dyn History) -> Result<Vec<f64>>;
    /// `P(C_t = 1 | C_{t-1} = R_t = 1, A_t = a, H_t = h)`.
    fn censoring_prob(&self, a: f64, h: &dyn History) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldDiagnostics {
    pub fold: usize,
    pub chosen: String,
    pub risks: Vec<CandidateRisk>,
}

/// Cross-fitted predictions, one entry per unit; `NaN` where no
/// prediction was requested.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitted {
    pub values: Vec<f64>,
    pub folds: Vec<FoldDiagnostics>,
}

pub(crate) fn learner_seed(seed: u64, purpose: u64, t: usize, fold: usize) -> u64 {
    let base = derive_seed(seed, tag::LEARNER);
    derive_seed(derive_seed(base, purpose << 32 | t as u64), fold as u64)
}

pub(crate) struct TrainingSet {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

/// Fits one model per fold from `build(fold)` and evaluates it on each
/// target design at the fold's rows flagged in `predict`. A constant
/// response is reproduced exactly without fitting.
pub(crate) fn cross_fit<B>(
    t: usize,
    folds: &FoldAssignment,
    predict: &[bool],
    targets: &[&Matrix],
    library: &LearnerLibrary,
    family: Family,
    seed: u64,
    build: B,
) -> Result<(Vec<Vec<f64>>, Vec<FoldDiagnostics>)>
where
    B: Fn(usize) -> Result<TrainingSet> + Sync,
{
    let n = folds.n();
    let per_fold = map_range(folds.num_folds(), |k| -> Result<(Vec<usize>, Vec<Vec<f64>>, FoldDiagnostics)> {
        let rows: Vec<usize> = (0..n).filter(|&i| predict[i] && folds.fold_of(i) == k).collect();
        let set = build(k).map_err(|e| e.in_fold(t, k))?;
        if rows.is_empty() {
            return Ok((rows, vec![Vec::new(); targets.len()], FoldDiagnostics { fold: k, chosen: "none".into(), risks: Vec::new() }));
        }
        if set.y.is_empty() {
            return Err(Error::LearnerFailed { name: "cross-fit".into(), reason: "no training rows".into() }.in_fold(t, k));
        }
        let first = set.y[0];
        if set.y.iter().all(|v| v.to_bits() == first.to_bits()) {
            let preds = vec![vec![first; rows.len()]; targets.len()];
            return Ok((rows, preds, FoldDiagnostics { fold: k, chosen: "constant response".into(), risks: Vec::new() }));
        }
        let selection = select_learner(library, &set.x, &set.y, set.weights.as_deref(), family, seed ^ k as u64)
            .map_err(|e| e.in_fold(t, k))?;
        let preds = targets.iter().map(|m| selection.model.predict(&m.select_rows(&rows))).collect();
        let chosen = selection.table[selection.chosen].name.clone();
        Ok((rows, preds, FoldDiagnostics { fold: k, chosen, risks: selection.table }))
    });
    let mut out = vec![vec![f64::NAN; n]; targets.len()];
    let mut diags = Vec::with_capacity(per_fold.len());
    for result in per_fold {
        let (rows, preds, diag) = result?;
        for (target, p) in out.iter_mut().zip(preds) {
            for (&i, v) in rows.iter().zip(p) {
                target[i] = v;
            }
        }
        diags.push(diag);
    }
    Ok((out, diags))
}

fn risk_set(data: &LongitudinalDataset, t: usize) -> Result<Vec<bool>> {
    let s: Vec<bool> = (0..data.n()).map(|i| data.at_risk(i, t)).collect();
    if s.iter().any(|&b| b) {
        Ok(s)
    } else {
        Err(Error::EmptyRiskSet { t })
    }
}

/// Cross-fitted `P(C_t = 1 | A_t, H_t)`, trained on and predicted for
/// units with `C_{t-1} = R_t = 1`; predictions are floored at `g_floor`.
pub fn fit_censoring(
    data: &LongitudinalDataset,
    t: usize,
    library: &LearnerLibrary,
    folds: &FoldAssignment,
    lag: MarkovLag,
    g_floor: f64,
    seed: u64,
) -> Result<CrossFitted> {
    let at_risk = risk_set(data, t)?;
    let x = data.design(t, lag, data.exposure(t));
    let c = data.censoring(t);
    let (mut values, folds_diag) = cross_fit(t, folds, &at_risk, &[&x], library, Family::Binomial, learner_seed(seed, 1, t, 0), |k| {
        let rows: Vec<usize> = (0..data.n()).filter(|&i| at_risk[i] && folds.fold_of(i) != k).collect();
        Ok(TrainingSet { x: x.select_rows(&rows), y: rows.iter().map(|&i| f64::from(c[i])).collect(), weights: None })
    })?;
    let mut values = values.remove(0);
    for v in values.iter_mut().filter(|v| !v.is_nan()) {
        *v = v.max(g_floor);
    }
    Ok(CrossFitted { values, folds: folds_diag })
}

/// Cross-fitted density ratio `g^d_t / g_t` at the observed `(A_t, H_t)`
/// by probabilistic classification on the duplicated risk set: each
/// training unit contributes `(d(A_t, H_t, eps_t), H_t)` with label 1 and
/// `(A_t, H_t)` with label 0, and the ratio is the fitted odds.
pub fn fit_density_ratio(
    data: &LongitudinalDataset,
    t: usize,
    policy: &dyn Policy,
    randomizer: &Randomizer,
    library: &LearnerLibrary,
    folds: &FoldAssignment,
    lag: MarkovLag,
    seed: u64,
) -> Result<CrossFitted> {
    let at_risk = risk_set(data, t)?;
    policy.check_kind(data.exposure_kind())?;
    let n = data.n();
    if policy.is_identity() {
        let values = (0..n).map(|i| if at_risk[i] { 1.0 } else { f64::NAN }).collect();
        return Ok(CrossFitted { values, folds: Vec::new() });
    }
    let observed = data.design(t, lag, data.exposure(t));
    let shifted = data.design(t, lag, &intervened_exposure(data, policy, t, randomizer)?);
    let q = data.exposure_width();
    let unchanged = |i: usize| observed.row(i)[..q] == shifted.row(i)[..q];
    let mut values = vec![f64::NAN; n];
    let mut diags = Vec::with_capacity(folds.num_folds());
    for k in 0..folds.num_folds() {
        let train: Vec<usize> = (0..n).filter(|&i| at_risk[i] && folds.fold_of(i) != k).collect();
        let valid: Vec<usize> = (0..n).filter(|&i| at_risk[i] && folds.fold_of(i) == k).collect();
        if valid.is_empty() {
            continue;
        }
        if !train.is_empty() && train.iter().all(|&i| unchanged(i)) {
            for &i in &valid {
                values[i] = 1.0;
            }
            diags.push(FoldDiagnostics { fold: k, chosen: "unchanged exposure".into(), risks: Vec::new() });
            continue;
        }
        let x = shifted.select_rows(&train).vstack(&observed.select_rows(&train));
        let mut y = vec![1.0; train.len()];
        y.resize(2 * train.len(), 0.0);
        let selection = select_learner(library, &x, &y, None, Family::Binomial, learner_seed(seed, 2, t, k))
            .map_err(|e| e.in_fold(t, k))?;
        let p = selection.model.predict(&observed.select_rows(&valid));
        for (&i, p) in valid.iter().zip(p) {
            values[i] = p / (1.0 - p);
        }
        diags.push(FoldDiagnostics { fold: k, chosen: selection.table[selection.chosen].name.clone(), risks: selection.table });
    }
    Ok(CrossFitted { values, folds: diags })
}

/// Closed-form density ratio from a known exposure law (discrete
/// exposures).
pub fn oracle_density_ratio(
    data: &LongitudinalDataset,
    t: usize,
    policy: &dyn Policy,
    oracle: &dyn NuisanceOracle,
) -> Result<Vec<f64>> {
    let at_risk = risk_set(data, t)?;
    policy.check_kind(data.exposure_kind())?;
    let a = data.exposure(t);
    (0..data.n())
        .map(|i| {
            if !at_risk[i] {
                return Ok(f64::NAN);
            }
            let h = data.unit_history(i, t);
            let g = oracle.exposure_pmf(&h)?;
            let gd = discrete_post_intervention_pmf(policy, &g, &h)?;
            let ai = a.get(i, 0) as usize;
            if g[ai] <= 0.0 {
                return Err(Error::InvalidArgument(format!("observed exposure has zero probability (unit {i}, t={t})")));
            }
            Ok(gd[ai] / g[ai])
        })
        .collect()
}

pub fn oracle_censoring(data: &LongitudinalDataset, t: usize, oracle: &dyn NuisanceOracle, g_floor: f64) -> Result<Vec<f64>> {
    let at_risk = risk_set(data, t)?;
    let a = data.exposure(t);
    (0..data.n())
        .map(|i| {
            if at_risk[i] {
                Ok(oracle.censoring_prob(a.get(i, 0), &data.unit_history(i, t))?.max(g_floor))
            } else {
                Ok(f64::NAN)
            }
        })
        .collect()
}

/// `w = ratio * c * r / g_c`, truncated at `c_max`, and exactly zero when
/// `c * r = 0`.
pub fn assemble_weights(ratio: &[f64], g_c: &[f64], c: &[u8], r: &[u8], c_max: f64, g_floor: f64) -> Result<Vec<f64>> {
    (0..ratio.len())
        .map(|i| {
            if c[i] == 0 || r[i] == 0 {
                return Ok(0.0);
            }
            if !(g_c[i] >= g_floor) {
                return Err(Error::InvalidArgument(format!("censoring probability {} below floor {g_floor}", g_c[i])));
            }
            if !(ratio[i] >= 0.0) || !ratio[i].is_finite() {
                return Err(Error::NonFinite(format!("density ratio {} at unit {i}", ratio[i])));
            }
            Ok((ratio[i] / g_c[i]).min(c_max))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightConfig {
    pub censoring: LearnerLibrary,
    pub ratio: LearnerLibrary,
    pub g_floor: f64,
    pub c_max: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            censoring: LearnerLibrary::single(LearnerSpec::glm()),
            ratio: LearnerLibrary::single(LearnerSpec::glm()),
            g_floor: 0.01,
            c_max: 50.0,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_floor > 0.0 && self.g_floor <= 1.0) {
            return Err(Error::InvalidArgument(format!("g_floor must lie in (0, 1], got {}", self.g_floor)));
        }
        if !(self.c_max >= 1.0) {
            return Err(Error::InvalidArgument(format!("c_max must be at least 1, got {}", self.c_max)));
        }
        self.censoring.validate()?;
        self.ratio.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeDiagnostics {
    pub t: usize,
    pub at_risk: usize,
    pub weight_max: f64,
    pub weight_mean: f64,
    pub censoring: Vec<FoldDiagnostics>,
    pub ratio: Vec<FoldDiagnostics>,
}

/// Per-time weights for `t = 1..=available()`. If fitting stopped early,
/// `failure()` holds the reason; horizons past that point are undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFit {
    pub c_max: f64,
    pub g_floor: f64,
    pub folds: FoldAssignment,
    ratio: Vec<Vec<f64>>,
    censoring: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    diagnostics: Vec<TimeDiagnostics>,
    failure: Option<Error>,
    scale: f64,
}

/// Where the nuisance laws come from.
#[derive(Clone, Copy)]
pub enum WeightSource<'a> {
    /// Cross-fitted learners.
    Learned,
    /// Known laws, e.g. from a simulation spec.
    Oracle(&'a dyn NuisanceOracle),
}

impl WeightFit {
    /// Fits `t = 1..=horizon`, stopping at the first time that fails.
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        data: &LongitudinalDataset,
        policy: &dyn Policy,
        randomizer: &Randomizer,
        folds: &FoldAssignment,
        config: &WeightConfig,
        lag: MarkovLag,
        source: WeightSource<'_>,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if folds.n() != data.n() {
            return Err(Error::InvalidArgument("fold assignment does not match the dataset".into()));
        }
        let horizon = horizon.min(data.tau());
        let mut fit = WeightFit {
            c_max: config.c_max,
            g_floor: config.g_floor,
            folds: folds.clone(),
            ratio: Vec::new(),
            censoring: Vec::new(),
            weights: Vec::new(),
            diagnostics: Vec::new(),
            failure: None,
            scale: 1.0,
        };
        for t in 1..=horizon {
            let step = || -> Result<(Vec<f64>, Vec<f64>, Vec<FoldDiagnostics>, Vec<FoldDiagnostics>)> {
                Ok(match source {
                    WeightSource::Learned => {
                        let g = fit_censoring(data, t, &config.censoring, folds, lag, config.g_floor, seed)?;
                        let r = fit_density_ratio(data, t, policy, randomizer, &config.ratio, folds, lag, seed)?;
                        (r.values, g.values, g.folds, r.folds)
                    }
                    WeightSource::Oracle(o) => (
                        oracle_density_ratio(data, t, policy, o)?,
                        oracle_censoring(data, t, o, config.g_floor)?,
                        Vec::new(),
                        Vec::new(),
                    ),
                })
            };
            match step() {
                Ok((ratio, g_c, cdiag, rdiag)) => {
                    let r: Vec<u8> = (0..data.n()).map(|i| u8::from(data.at_risk(i, t))).collect();
                    let w = assemble_weights(&ratio, &g_c, data.censoring(t), &r, config.c_max, config.g_floor)?;
                    fit.diagnostics.push(summarize(t, &w, &r, cdiag, rdiag));
                    fit.ratio.push(ratio);
                    fit.censoring.push(g_c);
                    fit.weights.push(w);
                }
                Err(e) => {
                    log::warn!("weights unavailable from t={t}: {e}");
                    fit.failure = Some(e);
                    break;
                }
            }
        }
        Ok(fit)
    }

    pub fn available(&self) -> usize {
        self.weights.len()
    }

    pub fn failure(&self) -> Option<&Error> {
        self.failure.as_ref()
    }

    /// Errors unless weights exist for every `t <= horizon`.
    pub fn require(&self, horizon: usize) -> Result<()> {
        if horizon <= self.available() {
            Ok(())
        } else {
            Err(self.failure.clone().unwrap_or(Error::TimeOutOfRange { t: horizon, tau: self.available() }))
        }
    }

    pub fn weights(&self, t: usize) -> &[f64] {
        &self.weights[t - 1]
    }

    pub fn ratio(&self, t: usize) -> &[f64] {
        &self.ratio[t - 1]
    }

    pub fn censoring(&self, t: usize) -> &[f64] {
        &self.censoring[t - 1]
    }

    pub fn diagnostics(&self) -> &[TimeDiagnostics] {
        &self.diagnostics
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Same fit with every untruncated weight multiplied by `factor`
    /// before truncation. Used to study misspecified weights.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale = self.scale * factor;
        for (k, w) in out.weights.iter_mut().enumerate() {
            for (i, wi) in w.iter_mut().enumerate() {
                if *wi > 0.0 {
                    *wi = (out.scale * self.ratio[k][i] / self.censoring[k][i]).min(self.c_max);
                }
            }
        }
        out
    }
}

fn summarize(t: usize, w: &[f64], at_risk: &[u8], censoring: Vec<FoldDiagnostics>, ratio: Vec<FoldDiagnostics>) -> TimeDiagnostics {
    let members: Vec<f64> = w.iter().zip(at_risk).filter(|(_, &r)| r == 1).map(|(w, _)| *w).collect();
    let weight_max = members.iter().copied().fold(0.0, f64::max);
    let weight_mean = if members.is_empty() { 0.0 } else { members.iter().sum::<f64>() / members.len() as f64 };
    TimeDiagnostics { t, at_risk: members.len(), weight_max, weight_mean, censoring, ratio }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assemble_weight_cases() {
        let w = assemble_weights(&[0.5, 3.0, 1.0, 100.0], &[0.8, 0.5, 1.0, 1.0], &[1, 0, 1, 1], &[1, 1, 1, 1], 50.0, 0.01).unwrap();
        assert!((w[0] - 0.625).abs() < 1e-15);
        assert_eq!(w[1], 0.0);
        assert_eq!(w[2], 1.0);
        assert_eq!(w[3], 50.0);
        assert!(assemble_weights(&[1.0], &[0.001], &[1], &[1], 50.0, 0.01).is_err());
        assert_eq!(assemble_weights(&[1.0], &[f64::NAN], &[1], &[0], 50.0, 0.01).unwrap(), vec![0.0]);
    }
}
