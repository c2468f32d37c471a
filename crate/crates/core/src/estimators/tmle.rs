use alloc::vec::Vec;

use super::{eif_transform, Estimate, EstimatorKind, EifValues, Prepared};
use crate::error::{Error, Result};
use crate::learners::Family;
use crate::stats::{expit, logit, mean};

/// Targeted estimate at `horizon`.
///
/// Outcomes live on `[0, 1]` and are mapped to `[gamma, 1 - gamma]`
/// before the logistic fits. At each `t`, an initial cross-fitted fit of
/// the plug-in pseudo-outcome is tilted by one intercept, fitted with
/// offset `logit(q)` and weights `prod_{k <= t} w_k` on the rows with
/// `C_t = R_t = 1`. The tilted fit at the intervened exposure becomes the
/// next pseudo-outcome; the estimate is its mean at `t = 1`.
pub fn tmle_estimate(p: &Prepared<'_>, horizon: usize) -> Result<Estimate> {
    p.check_horizon(horizon)?;
    let data = p.data;
    let n = data.n();
    let gamma = p.config.gamma;
    let to_unit = |y: f64| y * (1.0 - 2.0 * gamma) + gamma;
    let from_unit = |y: f64| (y - gamma) / (1.0 - 2.0 * gamma);

    // cumulative weights lambda_t = prod_{k <= t} w_k
    let mut lambda: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut acc = alloc::vec![1.0; n];
    for t in 1..=horizon {
        for (a, w) in acc.iter_mut().zip(p.weights.weights(t)) {
            *a *= w;
        }
        lambda.push(acc.clone());
    }

    let mut next: Vec<f64> = data.outcome(horizon + 1).iter().map(|&y| f64::from(y)).collect();
    let mut pseudo = alloc::vec![Vec::new(); horizon];
    let mut tilted: Vec<(Vec<f64>, Vec<f64>)> = alloc::vec![(Vec::new(), Vec::new()); horizon];
    let mut fits = Vec::with_capacity(horizon);
    for t in (1..=horizon).rev() {
        let response: Vec<f64> = next.iter().map(|&y| to_unit(y)).collect();
        let (q_obs, q_pol, diag) = p.regress(t, horizon, &response, Family::Binomial)?;
        let rows: Vec<usize> = (0..n).filter(|&i| data.in_regression(i, t)).collect();
        let y: Vec<f64> = rows.iter().map(|&i| response[i]).collect();
        let offset: Vec<f64> = rows.iter().map(|&i| logit(q_obs[i])).collect();
        let w: Vec<f64> = rows.iter().map(|&i| lambda[t - 1][i]).collect();
        let eps = solve_tilt(&y, &offset, &w, t)?;
        let update = |q: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| if data.at_risk(i, t) { from_unit(expit(logit(q[i]) + eps)) } else { 0.0 })
                .collect()
        };
        let (obs, pol) = (update(&q_obs), update(&q_pol));
        fits.push(diag);
        pseudo[t - 1] = core::mem::take(&mut next);
        next = p.carry(t, &pol);
        tilted[t - 1] = (obs, pol);
    }
    let theta = mean(&tilted[0].1);
    if !theta.is_finite() {
        return Err(Error::NonFinite("estimate".into()));
    }

    // phi_1 at the targeted fits
    let mut carried: Vec<f64> = data.outcome(horizon + 1).iter().map(|&y| f64::from(y)).collect();
    let mut phi = Vec::new();
    for t in (1..=horizon).rev() {
        let (obs, pol) = &tilted[t - 1];
        let mut phi_t = eif_transform(p.weights.weights(t), &carried, obs, pol);
        for (i, v) in phi_t.iter_mut().enumerate() {
            if !data.at_risk(i, t) {
                *v = 0.0;
            }
        }
        carried = p.carry(t, &phi_t);
        phi = phi_t;
    }
    let mut report = p.report(EstimatorKind::Tmle, horizon, theta, &phi);
    report.score_residual = Some(mean(&phi) - theta);
    fits.reverse();
    report.outcome_fits = fits;
    Ok(Estimate { report, eif: EifValues { phi, pseudo } })
}

/// Intercept `eps` solving `sum w (y - expit(offset + eps)) = 0`.
///
/// The weighted score is strictly decreasing in `eps`, so Newton steps
/// are kept inside the bracket of known sign changes and replaced by
/// bisection (or bracket expansion) whenever they would leave it.
pub(crate) fn solve_tilt(y: &[f64], offset: &[f64], w: &[f64], t: usize) -> Result<f64> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        log::warn!("all targeting weights are zero at t={t}; leaving the fit untilted");
        return Ok(0.0);
    }
    let score = |eps: f64| -> (f64, f64) {
        let mut s = 0.0;
        let mut info = 0.0;
        for ((&yi, &oi), &wi) in y.iter().zip(offset).zip(w) {
            if wi == 0.0 {
                continue;
            }
            let p = expit(oi + eps);
            s += wi * (yi - p);
            info += wi * p * (1.0 - p);
        }
        (s, info)
    };
    let tol = 1e-13 * total;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut eps = 0.0;
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..400 {
        let (s, info) = score(eps);
        if s.abs() < best.0 {
            best = (s.abs(), eps);
        }
        if s.abs() <= tol {
            return Ok(eps);
        }
        // root lies above eps when the score is positive
        if s > 0.0 {
            lo = eps;
        } else {
            hi = eps;
        }
        let newton = eps + s / info;
        let next = if newton > lo && newton < hi {
            newton
        } else if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo.is_finite() {
            lo + 1.0f64.max(2.0 * lo.abs())
        } else {
            hi - 1.0f64.max(2.0 * hi.abs())
        };
        if next == eps || !next.is_finite() {
            break;
        }
        eps = next;
    }
    let (residual, eps) = best;
    if residual <= 1e-10 * total {
        Ok(eps)
    } else {
        Err(Error::TiltNonConvergence { t })
    }
}
