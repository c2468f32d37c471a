use alloc::vec::Vec;

use super::{eif_transform, Estimate, EstimatorKind, EifValues, Prepared};
use crate::error::Result;
use crate::learners::Family;
use crate::stats::mean;

/// Sequentially doubly robust estimate at `horizon`.
///
/// Starting from `Y_{h+1}`, each step regresses the current pseudo-outcome
/// with squared-error loss, forms `phi_t`, and hands
/// `R_t phi_t + (1 - R_t) Y_t` to the step before. The estimate is the
/// mean of `phi_1`.
pub fn sdr_estimate(p: &Prepared<'_>, horizon: usize) -> Result<Estimate> {
    p.check_horizon(horizon)?;
    let data = p.data;
    let n = data.n();
    let mut next: Vec<f64> = data.outcome(horizon + 1).iter().map(|&y| f64::from(y)).collect();
    let mut pseudo = alloc::vec![Vec::new(); horizon];
    let mut fits = Vec::with_capacity(horizon);
    let mut phi = Vec::new();
    for t in (1..=horizon).rev() {
        let (q_obs, q_pol, diag) = p.regress(t, horizon, &next, Family::Gaussian)?;
        let w = p.weights.weights(t);
        let mut phi_t = eif_transform(w, &next, &q_obs, &q_pol);
        for (i, v) in phi_t.iter_mut().enumerate().take(n) {
            if !data.at_risk(i, t) {
                *v = 0.0;
            }
        }
        fits.push(diag);
        pseudo[t - 1] = core::mem::take(&mut next);
        next = p.carry(t, &phi_t);
        phi = phi_t;
    }
    let theta = mean(&phi);
    if !theta.is_finite() {
        return Err(crate::error::Error::NonFinite("estimate".into()));
    }
    let mut report = p.report(EstimatorKind::Sdr, horizon, theta, &phi);
    fits.reverse();
    report.outcome_fits = fits;
    Ok(Estimate { report, eif: EifValues { phi, pseudo } })
}
