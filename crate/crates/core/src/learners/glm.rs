//! Generalized linear models with canonical link, fit by iteratively
//! reweighted least squares on standardized features.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{weighted_mean, Family, FittedModel, Learner, Scaler};
use crate::error::{Error, Result};
use crate::linalg::{solve_spd, Matrix};
use crate::stats::{expit, logit, sq};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmOptions {
    /// Added to the diagonal of the information matrix, intercept excluded.
    pub ridge: f64,
    /// Relative deviance change that ends the iteration.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self { ridge: 1e-8, tolerance: 1e-8, max_iter: 50 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Glm {
    pub options: GlmOptions,
}

/// Fitted coefficients on the original feature scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub family: Family,
    pub intercept: f64,
    /// One entry per input column; dropped columns carry zero.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl GlmFit {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }

    /// Predictions on the response scale with an optional offset added to
    /// the linear predictor.
    pub fn predict_with_offset(&self, x: &Matrix, offset: Option<&[f64]>) -> Vec<f64> {
        (0..x.rows())
            .map(|i| {
                let eta = self.linear_predictor(x.row(i)) + offset.map_or(0.0, |o| o[i]);
                match self.family {
                    Family::Binomial => expit(eta),
                    Family::Gaussian => eta,
                }
            })
            .collect()
    }
}

impl FittedModel for GlmFit {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        self.predict_with_offset(x, None)
    }
}

impl Learner for Glm {
    fn name(&self) -> String {
        "glm".into()
    }

    fn fit(&self, x: &Matrix, y: &[f64], weights: &[f64], family: Family, _seed: u64) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(fit_glm(x, y, weights, family, None, self.options)?))
    }
}

fn deviance(family: Family, y: &[f64], mu: &[f64], w: &[f64]) -> f64 {
    let mut d = 0.0;
    for i in 0..y.len() {
        d += w[i]
            * match family {
                Family::Gaussian => sq(y[i] - mu[i]),
                Family::Binomial => {
                    let m = mu[i].clamp(1e-300, 1.0 - 1e-16);
                    let mut term = 0.0;
                    if y[i] > 0.0 {
                        term += y[i] * libm::log(y[i] / m);
                    }
                    if y[i] < 1.0 {
                        term += (1.0 - y[i]) * libm::log((1.0 - y[i]) / (1.0 - m));
                    }
                    2.0 * term
                }
            };
    }
    d
}

/// Largest component of the penalized score.
fn max_score(z: &Matrix, y: &[f64], mu: &[f64], w: &[f64], beta: &[f64], ridge: f64) -> f64 {
    let mut s: Vec<f64> = beta.iter().enumerate().map(|(a, b)| if a == 0 { 0.0 } else { -ridge * b }).collect();
    for i in 0..z.rows() {
        let r = w[i] * (y[i] - mu[i]);
        for (a, zij) in s.iter_mut().zip(z.row(i)) {
            *a += r * zij;
        }
    }
    s.iter().fold(0.0, |m, v| v.abs().max(m))
}

/// Weighted GLM fit with an optional offset. At convergence the
/// intercept score `sum_i w_i (y_i - mu_i)` is zero to solver precision.
pub fn fit_glm(
    x: &Matrix,
    y: &[f64],
    weights: &[f64],
    family: Family,
    offset: Option<&[f64]>,
    options: GlmOptions,
) -> Result<GlmFit> {
    let n = x.rows();
    let scaler = Scaler::fit(x);
    let p = scaler.width() + 1;
    let mut z = Matrix::zeros(n, p);
    for i in 0..n {
        let row = z.row_mut(i);
        row[0] = 1.0;
        scaler.transform_row(x.row(i), &mut row[1..]);
    }
    let off = |i: usize| offset.map_or(0.0, |o| o[i]);

    let mut beta = vec![0.0; p];
    let mut eta: Vec<f64> = match family {
        Family::Gaussian => (0..n).map(off).collect(),
        Family::Binomial => {
            // start from the shrunken responses, as is customary for logistic IRLS
            (0..n).map(|i| logit((weights[i] * y[i] + 0.5) / (weights[i] + 1.0))).collect()
        }
    };
    if family == Family::Gaussian && offset.is_none() {
        beta[0] = weighted_mean(y, weights);
        eta.iter_mut().for_each(|e| *e = beta[0]);
    }
    let mean_fn = |e: f64| match family {
        Family::Binomial => expit(e),
        Family::Gaussian => e,
    };
    let mut mu: Vec<f64> = eta.iter().map(|&e| mean_fn(e)).collect();
    let mut dev = deviance(family, y, &mu, weights);
    let mut converged = false;
    let mut iterations = 0;
    let total_weight: f64 = weights.iter().sum();
    let mut info = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];

    for iter in 1..=options.max_iter {
        iterations = iter;
        info.iter_mut().for_each(|v| *v = 0.0);
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let (wi, work) = match family {
                Family::Gaussian => (weights[i], y[i] - off(i)),
                Family::Binomial => {
                    let v = (mu[i] * (1.0 - mu[i])).max(1e-12);
                    (weights[i] * v, eta[i] - off(i) + (y[i] - mu[i]) / v)
                }
            };
            if wi == 0.0 {
                continue;
            }
            let zi = z.row(i);
            for a in 0..p {
                let za = wi * zi[a];
                rhs[a] += za * work;
                for b in 0..=a {
                    info[a * p + b] += za * zi[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[b * p + a] = info[a * p + b];
            }
        }
        for a in 1..p {
            info[a * p + a] += options.ridge;
        }
        let mut next = rhs.clone();
        if !solve_spd(&info, p, &mut next) {
            let trace: f64 = (0..p).map(|a| info[a * p + a]).sum();
            let jitter = 1e-6 * (trace / p as f64).max(1e-12);
            let mut jittered = info.clone();
            for a in 0..p {
                jittered[a * p + a] += jitter;
            }
            next = rhs.clone();
            if !solve_spd(&jittered, p, &mut next) {
                return Err(Error::LearnerFailed {
                    name: "glm".into(),
                    reason: format!("singular information matrix at iteration {iter}"),
                });
            }
        }
        beta = next;
        for i in 0..n {
            eta[i] = off(i) + z.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
            mu[i] = mean_fn(eta[i]);
        }
        let new_dev = deviance(family, y, &mu, weights);
        if !new_dev.is_finite() {
            return Err(Error::LearnerFailed { name: "glm".into(), reason: "non-finite deviance".into() });
        }
        let change = (new_dev - dev).abs() / (new_dev.abs() + 0.1);
        dev = new_dev;
        // the deviance criterion alone leaves the score at about sqrt(tol);
        // one more Newton step squares it
        if family == Family::Gaussian || (change < options.tolerance && max_score(&z, y, &mu, weights, &beta, options.ridge) <= 1e-12 * total_weight) {
            converged = true;
            break;
        }
    }

    let mut coefficients = vec![0.0; x.cols()];
    let mut intercept = beta[0];
    for (k, &j) in scaler.keep.iter().enumerate() {
        coefficients[j] = beta[k + 1] / scaler.sd[k];
        intercept -= beta[k + 1] * scaler.mean[k] / scaler.sd[k];
    }
    Ok(GlmFit { family, intercept, coefficients, iterations, converged })
}
