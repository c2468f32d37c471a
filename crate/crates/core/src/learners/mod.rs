//! Regression and classification learners for nuisance fitting, fold
//! machinery and cross-validated learner selection.
//!
//! Every learner is deterministic given `(data, weights, seed)`. Binomial
//! predictions leave this module clipped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.

mod boost;
mod constant;
mod folds;
mod glm;
mod knn;
mod saturated;
mod select;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

pub use boost::{Boosting, BoostingModel};
pub use constant::{Constant, ConstantModel};
pub use folds::{make_folds, FoldAssignment};
pub use glm::{fit_glm, Glm, GlmFit, GlmOptions};
pub use knn::{Knn, KnnModel};
pub use saturated::{Saturated, SaturatedModel};
pub use select::{cv_risk, select_learner, CandidateRisk, Selection};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stats::sq;

pub const PROB_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Family {
    /// Response in `[0, 1]`, logit link, log-loss risk.
    Binomial,
    /// Real response, identity link, squared-error risk.
    Gaussian,
}

pub trait FittedModel: Send + Sync + fmt::Debug {
    fn predict(&self, x: &Matrix) -> Vec<f64>;
}

pub trait Learner: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// Raw fit. Callers normally go through [`fit_learner`], which checks
    /// inputs, handles degenerate designs and clips binomial predictions.
    fn fit(&self, x: &Matrix, y: &[f64], weights: &[f64], family: Family, seed: u64) -> Result<Box<dyn FittedModel>>;
}

#[derive(Debug)]
struct Clipped(Box<dyn FittedModel>);

impl FittedModel for Clipped {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut p = self.0.predict(x);
        for v in &mut p {
            *v = v.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        }
        p
    }
}

/// Checked fit. `weights = None` means unit weights.
///
/// Designs with no columns or fewer than two rows fall back to the
/// constant learner.
pub fn fit_learner(
    learner: &dyn Learner,
    x: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
    family: Family,
    seed: u64,
) -> Result<Box<dyn FittedModel>> {
    let n = x.rows();
    let fail = |reason: String| Error::LearnerFailed { name: learner.name(), reason };
    if y.len() != n {
        return Err(fail(format!("{} responses for {n} rows", y.len())));
    }
    if n == 0 {
        return Err(fail("no training rows".into()));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("training data for `{}`", learner.name())));
    }
    if family == Family::Binomial && y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(fail("binomial response outside [0, 1]".into()));
    }
    let unit;
    let w = match weights {
        Some(w) => {
            if w.len() != n || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(fail("weights must be finite, non-negative and one per row".into()));
            }
            w
        }
        None => {
            unit = alloc::vec![1.0; n];
            &unit
        }
    };
    if w.iter().sum::<f64>() <= 0.0 {
        return Err(fail("weights sum to zero".into()));
    }
    let model = if x.cols() == 0 || n < 2 {
        if n < 2 {
            log::warn!("`{}` given a single training row; using the constant learner", learner.name());
        }
        Constant.fit(x, y, w, family, seed)?
    } else {
        learner.fit(x, y, w, family, seed)?
    };
    Ok(match family {
        Family::Binomial => Box::new(Clipped(model)),
        Family::Gaussian => model,
    })
}

/// Serializable learner description; the configuration surface for every
/// nuisance fit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum LearnerSpec {
    Glm {
        #[cfg_attr(feature = "serde", serde(default = "defaults::ridge"))]
        ridge: f64,
    },
    Boost {
        #[cfg_attr(feature = "serde", serde(default = "defaults::rounds"))]
        rounds: usize,
        #[cfg_attr(feature = "serde", serde(default = "defaults::shrinkage"))]
        shrinkage: f64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::depth"))]
        depth: usize,
        #[cfg_attr(feature = "serde", serde(default = "defaults::subsample"))]
        subsample: f64,
    },
    Constant,
    Knn {
        #[cfg_attr(feature = "serde", serde(default = "defaults::k"))]
        k: usize,
    },
    /// Cell means over distinct design rows.
    Saturated,
    /// A user-supplied learner; not representable in configuration files.
    #[cfg_attr(feature = "serde", serde(skip))]
    Custom(CustomLearner),
}

/// Wrapper that lets any [`Learner`] sit in a [`LearnerLibrary`]. Two
/// wrappers are equal when they share the same allocation.
#[derive(Debug, Clone)]
pub struct CustomLearner(pub Arc<dyn Learner>);

impl PartialEq for CustomLearner {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

mod defaults {
    pub fn ridge() -> f64 {
        1e-8
    }
    pub fn rounds() -> usize {
        100
    }
    pub fn shrinkage() -> f64 {
        0.1
    }
    pub fn depth() -> usize {
        2
    }
    pub fn subsample() -> f64 {
        1.0
    }
    pub fn k() -> usize {
        10
    }
}

impl LearnerSpec {
    pub fn glm() -> Self {
        LearnerSpec::Glm { ridge: defaults::ridge() }
    }

    pub fn boost() -> Self {
        LearnerSpec::Boost {
            rounds: defaults::rounds(),
            shrinkage: defaults::shrinkage(),
            depth: defaults::depth(),
            subsample: defaults::subsample(),
        }
    }

    pub fn knn() -> Self {
        LearnerSpec::Knn { k: defaults::k() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match *self {
            LearnerSpec::Glm { ridge } if !(ridge >= 0.0 && ridge.is_finite()) => bad(format!("glm ridge {ridge}")),
            LearnerSpec::Boost { rounds, shrinkage, depth, subsample } => {
                if rounds == 0 || !(1..=3).contains(&depth) {
                    bad(format!("boosting needs rounds >= 1 and depth in 1..=3, got {rounds}, {depth}"))
                } else if !(shrinkage > 0.0 && shrinkage <= 1.0) || !(subsample > 0.0 && subsample <= 1.0) {
                    bad(format!("boosting shrinkage/subsample out of (0, 1]: {shrinkage}, {subsample}"))
                } else {
                    Ok(())
                }
            }
            LearnerSpec::Knn { k: 0 } => bad("knn needs k >= 1".into()),
            _ => Ok(()),
        }
    }
}

impl Learner for LearnerSpec {
    fn name(&self) -> String {
        match self {
            LearnerSpec::Glm { .. } => "glm".into(),
            LearnerSpec::Boost { rounds, depth, .. } => format!("boost(rounds={rounds}, depth={depth})"),
            LearnerSpec::Constant => "constant".into(),
            LearnerSpec::Knn { k } => format!("knn(k={k})"),
            LearnerSpec::Saturated => "saturated".into(),
            LearnerSpec::Custom(c) => c.0.name(),
        }
    }

    fn fit(&self, x: &Matrix, y: &[f64], weights: &[f64], family: Family, seed: u64) -> Result<Box<dyn FittedModel>> {
        match *self {
            LearnerSpec::Glm { ridge } => Glm { options: GlmOptions { ridge, ..GlmOptions::default() } }.fit(x, y, weights, family, seed),
            LearnerSpec::Boost { rounds, shrinkage, depth, subsample } => {
                Boosting { rounds, shrinkage, depth, subsample, lambda: 1.0 }.fit(x, y, weights, family, seed)
            }
            LearnerSpec::Constant => Constant.fit(x, y, weights, family, seed),
            LearnerSpec::Knn { k } => Knn { k }.fit(x, y, weights, family, seed),
            LearnerSpec::Saturated => Saturated.fit(x, y, weights, family, seed),
            LearnerSpec::Custom(ref c) => c.0.fit(x, y, weights, family, seed),
        }
    }
}

/// Ordered candidate list for discrete cross-validated selection.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearnerLibrary {
    pub candidates: Vec<LearnerSpec>,
    /// Number of inner folds for selection.
    #[cfg_attr(feature = "serde", serde(default = "LearnerLibrary::default_inner_folds"))]
    pub inner_folds: usize,
}

impl LearnerLibrary {
    fn default_inner_folds() -> usize {
        5
    }

    pub fn single(spec: LearnerSpec) -> Self {
        Self { candidates: alloc::vec![spec], inner_folds: Self::default_inner_folds() }
    }

    pub fn new(candidates: Vec<LearnerSpec>) -> Self {
        Self { candidates, inner_folds: Self::default_inner_folds() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::InvalidArgument("learner library is empty".into()));
        }
        if self.inner_folds < 2 {
            return Err(Error::InvalidArgument("selection needs at least 2 inner folds".into()));
        }
        self.candidates.iter().try_for_each(LearnerSpec::validate)
    }
}

/// Standardization computed on training rows. Columns with zero spread
/// are dropped.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Scaler {
    pub keep: Vec<usize>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let mut keep = Vec::new();
        let mut mean = Vec::new();
        let mut sd = Vec::new();
        for j in 0..x.cols() {
            let m = (0..x.rows()).map(|i| x.get(i, j)).sum::<f64>() / n;
            let v = (0..x.rows()).map(|i| sq(x.get(i, j) - m)).sum::<f64>() / n;
            let s = libm::sqrt(v);
            if s > 1e-12 * (1.0 + m.abs()) {
                keep.push(j);
                mean.push(m);
                sd.push(s);
            }
        }
        Self { keep, mean, sd }
    }

    pub fn width(&self) -> usize {
        self.keep.len()
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for (k, &j) in self.keep.iter().enumerate() {
            out[k] = (row[j] - self.mean[k]) / self.sd[k];
        }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let p = self.width();
        let mut out = Matrix::zeros(x.rows(), p);
        for i in 0..x.rows() {
            self.transform_row(x.row(i), out.row_mut(i));
        }
        out
    }
}

pub(crate) fn weighted_mean(y: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, stream_rng, uniform};
    use proptest::prelude::*;

    fn all_specs() -> Vec<LearnerSpec> {
        alloc::vec![LearnerSpec::glm(), LearnerSpec::boost(), LearnerSpec::Constant, LearnerSpec::knn(), LearnerSpec::Saturated]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn binomial_predictions_in_unit_interval(seed in 0u64..10_000, n in 2usize..60, p in 0usize..4) {
            let mut rng = stream_rng(seed, 0);
            let x = Matrix::from_vec(n, p, (0..n * p).map(|_| 10.0 * standard_normal(&mut rng)).collect());
            let y: Vec<f64> = (0..n).map(|_| if uniform(&mut rng) < 0.5 { 1.0 } else { uniform(&mut rng) }).collect();
            let xt = Matrix::from_vec(7, p, (0..7 * p).map(|_| 100.0 * standard_normal(&mut rng)).collect());
            for spec in all_specs() {
                let m = fit_learner(&spec, &x, &y, None, Family::Binomial, seed).unwrap();
                for v in m.predict(&xt).into_iter().chain(m.predict(&x)) {
                    prop_assert!((PROB_FLOOR..=1.0 - PROB_FLOOR).contains(&v), "{} gave {v}", spec.name());
                }
            }
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let x = Matrix::column(&[1.0, f64::NAN]);
        let err = fit_learner(&LearnerSpec::glm(), &x, &[0.0, 1.0], None, Family::Binomial, 0).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn zero_column_design_is_intercept_only() {
        let x = Matrix::zeros(4, 0);
        let m = fit_learner(&LearnerSpec::boost(), &x, &[0.0, 1.0, 1.0, 1.0], None, Family::Binomial, 0).unwrap();
        assert!((m.predict(&Matrix::zeros(2, 0))[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn fits_are_deterministic() {
        let mut rng = stream_rng(3, 0);
        let x = Matrix::from_vec(80, 2, (0..160).map(|_| standard_normal(&mut rng)).collect());
        let y: Vec<f64> = (0..80).map(|i| f64::from(u8::from(x.get(i, 0) > 0.0))).collect();
        for spec in [LearnerSpec::Boost { rounds: 20, shrinkage: 0.1, depth: 2, subsample: 0.5 }, LearnerSpec::glm(), LearnerSpec::knn()] {
            let a = fit_learner(&spec, &x, &y, None, Family::Binomial, 9).unwrap().predict(&x);
            let b = fit_learner(&spec, &x, &y, None, Family::Binomial, 9).unwrap().predict(&x);
            assert_eq!(a, b);
        }
    }
}
