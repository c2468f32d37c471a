use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{fit_learner, make_folds, Family, FittedModel, Learner, LearnerLibrary, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::derive_seed;
use crate::stats::sq;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRisk {
    pub name: String,
    /// Cross-validated risk; `None` when the candidate failed, or when it
    /// was the only candidate and selection was skipped.
    pub risk: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct Selection {
    pub model: Box<dyn FittedModel>,
    pub chosen: usize,
    pub table: Vec<CandidateRisk>,
}

/// Weighted log loss (binomial) or squared error (Gaussian).
pub fn risk(family: Family, y: &[f64], pred: &[f64], w: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        let l = match family {
            Family::Gaussian => sq(y[i] - pred[i]),
            Family::Binomial => {
                let p = pred[i].clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                -(y[i] * libm::log(p) + (1.0 - y[i]) * libm::log(1.0 - p))
            }
        };
        num += w[i] * l;
        den += w[i];
    }
    num / den
}

/// Cross-validated risk of one learner over `folds` random folds.
pub fn cv_risk(
    learner: &dyn Learner,
    x: &Matrix,
    y: &[f64],
    weights: &[f64],
    family: Family,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let n = x.rows();
    let assignment = make_folds(n, folds.min(n), None, seed)?;
    let mut pred = vec![0.0; n];
    for k in 0..assignment.num_folds() {
        let train = assignment.training(k);
        let valid = assignment.validation(k);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let wt: Vec<f64> = train.iter().map(|&i| weights[i]).collect();
        let model = fit_learner(learner, &x.select_rows(&train), &yt, Some(&wt), family, derive_seed(seed, k as u64))?;
        for (i, p) in valid.iter().zip(model.predict(&x.select_rows(&valid))) {
            pred[*i] = p;
        }
    }
    Ok(risk(family, y, &pred, weights))
}

/// Discrete super learner: the candidate with the smallest
/// cross-validated risk, refit on all rows. Ties go to the earlier
/// candidate. A single-candidate library is fit directly.
pub fn select_learner(
    library: &LearnerLibrary,
    x: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
    family: Family,
    seed: u64,
) -> Result<Selection> {
    let n = x.rows();
    let unit;
    let w = match weights {
        Some(w) => w,
        None => {
            unit = vec![1.0; n];
            &unit
        }
    };
    if library.candidates.len() == 1 || n < 2 {
        let spec = &library.candidates[0];
        let model = fit_learner(spec, x, y, Some(w), family, seed)?;
        let table = vec![CandidateRisk { name: spec.name(), risk: None, error: None }];
        return Ok(Selection { model, chosen: 0, table });
    }
    let mut table = Vec::with_capacity(library.candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for (c, spec) in library.candidates.iter().enumerate() {
        match cv_risk(spec, x, y, w, family, library.inner_folds, seed) {
            Ok(r) if r.is_finite() => {
                if best.is_none_or(|(_, b)| r < b) {
                    best = Some((c, r));
                }
                table.push(CandidateRisk { name: spec.name(), risk: Some(r), error: None });
            }
            Ok(r) => table.push(CandidateRisk { name: spec.name(), risk: None, error: Some(format!("risk {r}")) }),
            Err(e) => table.push(CandidateRisk { name: spec.name(), risk: None, error: Some(format!("{e}")) }),
        }
    }
    let Some((chosen, _)) = best else {
        let detail: Vec<String> = table
            .iter()
            .map(|c| format!("{}: {}", c.name, c.error.as_deref().unwrap_or("unknown")))
            .collect();
        return Err(Error::AllLearnersFailed(detail.join("; ")));
    };
    log::debug!("selected {} from {:?}", table[chosen].name, table);
    let model = fit_learner(&library.candidates[chosen], x, y, Some(w), family, seed)?;
    Ok(Selection { model, chosen, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerSpec;
    use crate::rng::{standard_normal, stream_rng, uniform};
    use crate::stats::expit;

    #[test]
    fn single_candidate_is_returned() {
        let lib = LearnerLibrary::single(LearnerSpec::Constant);
        let x = Matrix::zeros(3, 1);
        let s = select_learner(&lib, &x, &[0.0, 1.0, 1.0], None, Family::Gaussian, 0).unwrap();
        assert_eq!(s.chosen, 0);
        assert!((s.model.predict(&x)[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn glm_beats_constant_on_linear_signal() {
        let mut rng = stream_rng(5, 0);
        let n = 500;
        let x = Matrix::from_vec(n, 2, (0..2 * n).map(|_| standard_normal(&mut rng)).collect());
        let y: Vec<f64> = (0..n)
            .map(|i| f64::from(u8::from(uniform(&mut rng) < expit(2.0 * x.get(i, 0) - x.get(i, 1)))))
            .collect();
        let lib = LearnerLibrary::new(vec![LearnerSpec::Constant, LearnerSpec::glm()]);
        let s = select_learner(&lib, &x, &y, None, Family::Binomial, 1).unwrap();
        assert_eq!(s.chosen, 1);
        let risks: Vec<f64> = s.table.iter().map(|c| c.risk.unwrap()).collect();
        assert!(risks.iter().all(|&r| risks[s.chosen] <= r));
    }

    #[test]
    fn duplicate_candidates_tie_to_first() {
        let mut rng = stream_rng(6, 0);
        let x = Matrix::from_vec(60, 1, (0..60).map(|_| standard_normal(&mut rng)).collect());
        let y: Vec<f64> = (0..60).map(|i| x.get(i, 0) + 0.1 * standard_normal(&mut rng)).collect();
        let lib = LearnerLibrary::new(vec![LearnerSpec::glm(), LearnerSpec::glm()]);
        let s = select_learner(&lib, &x, &y, None, Family::Gaussian, 2).unwrap();
        assert_eq!(s.chosen, 0);
        assert_eq!(s.table[0].risk, s.table[1].risk);
    }

    #[test]
    fn all_failures_are_named() {
        let lib = LearnerLibrary::new(vec![LearnerSpec::glm(), LearnerSpec::Constant]);
        let x = Matrix::column(&[0.0, 1.0, 2.0, 3.0]);
        let err = select_learner(&lib, &x, &[0.0, 2.0, 1.0, 1.0], None, Family::Binomial, 0).unwrap_err();
        match err {
            Error::AllLearnersFailed(msg) => assert!(msg.contains("glm") && msg.contains("constant"), "{msg}"),
            e => panic!("{e:?}"),
        }
    }
}
