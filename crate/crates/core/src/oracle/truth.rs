//! Exact ground truth by enumeration over fully discrete specs.
//!
//! Three engines share nothing but the law evaluation:
//! * a backward recursion over the sequential regressions `q_t`,
//! * a forward push of probability mass through the intervened world,
//! * an enumeration of the observed world (with censoring) that evaluates
//!   expectations of the influence-function transform under arbitrary
//!   nuisances.

use alloc::format;
use alloc::vec::Vec;

use super::spec::{DgpSpec, Path};
use super::{TruthMethod, TruthReport};
use crate::data::History;
use crate::error::{Error, Result};
use crate::nuisance::NuisanceOracle;
use crate::policy::{discrete_post_intervention_pmf, Policy};

/// Largest number of enumerated paths accepted by the exact engines.
pub const PATH_LIMIT: u128 = 1_000_000;

fn check_enumerable(spec: &DgpSpec, policy: &dyn Policy, horizon: usize) -> Result<()> {
    spec.validate()?;
    policy.check_kind(&spec.exposure_kind())?;
    if !spec.is_discrete() {
        return Err(Error::Unsupported("exact enumeration needs a fully discrete spec".into()));
    }
    if horizon == 0 || horizon > spec.tau {
        return Err(Error::TimeOutOfRange { t: horizon, tau: spec.tau });
    }
    let mut paths: u128 = spec.baseline.iter().map(|l| l.levels().unwrap_or(1) as u128).product();
    for step in &spec.steps[..horizon] {
        let covs: u128 = step.covariates.iter().map(|l| l.levels().unwrap_or(1) as u128).product();
        let levels = spec.exposure_levels.unwrap_or(1) as u128;
        // covariates, natural exposure, and its image; events end a path
        paths = paths.saturating_mul(covs).saturating_mul(levels * levels);
        if paths > PATH_LIMIT {
            return Err(Error::StateSpace(paths));
        }
    }
    Ok(())
}

/// `(P(D = 1), P(Y = 1 | D = 0))` at `path.t` for a unit at risk.
fn event_probs(spec: &DgpSpec, path: &Path) -> Result<(f64, f64)> {
    let (competing, outcome) = spec.event_laws(path.t);
    let env = path.env(None);
    let p_d = match competing {
        Some(l) => l.prob_one(&env)?,
        None => 0.0,
    };
    let p_y = match outcome {
        Some(l) => l.prob_one(&env)?,
        None => 0.0,
    };
    Ok((p_d, p_y))
}

/// Calls `f(path, prob)` for every baseline and `L_t` configuration, with
/// `path.t` set to `t`, extending `path` in place.
fn for_covariates(
    spec: &DgpSpec,
    path: &mut Path,
    t: usize,
    f: &mut dyn FnMut(&mut Path, f64) -> Result<()>,
) -> Result<()> {
    fn rec(
        spec: &DgpSpec,
        path: &mut Path,
        t: usize,
        j: usize,
        prob: f64,
        f: &mut dyn FnMut(&mut Path, f64) -> Result<()>,
    ) -> Result<()> {
        let laws = if t == 0 { &spec.baseline } else { &spec.steps[t - 1].covariates };
        if j == laws.len() {
            return f(path, prob);
        }
        let pmf = laws[j].pmf(&path.env(None))?;
        for (k, p) in pmf.into_iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            if t == 0 {
                path.w.push(k as f64);
            } else {
                path.l[t - 1].push(k as f64);
            }
            rec(spec, path, t, j + 1, prob * p, f)?;
            if t == 0 {
                path.w.pop();
            } else {
                path.l[t - 1].pop();
            }
        }
        Ok(())
    }
    path.t = t;
    if t >= 1 {
        path.l.push(Vec::new());
    }
    let out = rec(spec, path, t, 0, 1.0, f);
    if t >= 1 {
        path.l.pop();
    }
    out
}

/// The sequential regressions of the identification formula, evaluated
/// exactly. `q(a, h)` is the probability of the outcome at the horizon
/// given `A_t = a`, `H_t = h`, intervening from `t + 1` on.
pub struct ExactRegression<'a> {
    spec: &'a DgpSpec,
    policy: &'a dyn Policy,
    horizon: usize,
}

impl<'a> ExactRegression<'a> {
    pub fn new(spec: &'a DgpSpec, policy: &'a dyn Policy, horizon: usize) -> Result<Self> {
        check_enumerable(spec, policy, horizon)?;
        Ok(Self { spec, policy, horizon })
    }

    /// Value at the start of `path.t`, for a unit event-free through
    /// `path.t - 1`; `path` holds `L` and intervened `A` before `path.t`.
    fn start(&self, path: &mut Path) -> Result<f64> {
        let t = path.t;
        let (p_d, p_y) = if t >= 2 { event_probs(self.spec, path)? } else { (0.0, 0.0) };
        if t == self.horizon + 1 {
            return Ok((1.0 - p_d) * p_y);
        }
        let survive = (1.0 - p_d) * (1.0 - p_y);
        let mut cont = 0.0;
        if survive > 0.0 {
            for_covariates(self.spec, path, t, &mut |path, p| {
                let g = self.spec.steps[t - 1].exposure.pmf(&path.env(None))?;
                for (a, ga) in g.into_iter().enumerate() {
                    if ga > 0.0 {
                        cont += p * ga * self.intervened(path, a as f64)?;
                    }
                }
                Ok(())
            })?;
        }
        Ok((1.0 - p_d) * p_y + survive * cont)
    }

    /// `E[q_t(A^d_t, H_t)]` over the randomizer, for natural value `a`.
    fn intervened(&self, path: &mut Path, a: f64) -> Result<f64> {
        let mut v = 0.0;
        for (ad, p) in self.policy.image_law(a, path)? {
            if p > 0.0 {
                v += p * self.after_exposure(path, ad)?;
            }
        }
        Ok(v)
    }

    /// `q_t(a, h)` with `path` at time `t`.
    fn after_exposure(&self, path: &mut Path, a: f64) -> Result<f64> {
        let t = path.t;
        path.a.push(a);
        path.t = t + 1;
        let v = self.start(path);
        path.t = t;
        path.a.pop();
        v
    }

    pub fn q(&self, a: f64, h: &dyn History) -> Result<f64> {
        if h.time() > self.horizon {
            return Err(Error::TimeOutOfRange { t: h.time(), tau: self.horizon });
        }
        self.after_exposure(&mut Path::from_history(h), a)
    }

    pub fn theta(&self) -> Result<f64> {
        let mut theta = 0.0;
        for_covariates(self.spec, &mut Path::default(), 0, &mut |path, p| {
            let mut path = path.clone();
            path.t = 1;
            theta += p * self.start(&mut path)?;
            Ok(())
        })?;
        Ok(theta)
    }
}

/// Exact `theta` at `horizon` by the backward recursion.
pub fn exhaustive_truth(spec: &DgpSpec, policy: &dyn Policy, horizon: usize) -> Result<TruthReport> {
    let theta = ExactRegression::new(spec, policy, horizon)?.theta()?;
    Ok(TruthReport { horizon, theta, method: TruthMethod::Exact, replicates: None, mc_se: None })
}

/// Forward propagation of probability mass. With `censored = false` the
/// world is intervened and uncensored; with `censored = true` the
/// natural exposure is kept and mass leaving the study is dropped, giving
/// the law of the recorded outcome.
fn forward(spec: &DgpSpec, policy: &dyn Policy, horizon: usize, censored: bool) -> Result<f64> {
    check_enumerable(spec, policy, horizon)?;
    let mut states: Vec<(Path, f64)> = Vec::new();
    for_covariates(spec, &mut Path::default(), 0, &mut |path, p| {
        states.push((path.clone(), p));
        Ok(())
    })?;
    let mut absorbed = 0.0;
    for t in 1..=horizon + 1 {
        if t >= 2 {
            for (path, p) in states.iter_mut() {
                path.t = t;
                let (p_d, p_y) = event_probs(spec, path)?;
                absorbed += *p * (1.0 - p_d) * p_y;
                *p *= (1.0 - p_d) * (1.0 - p_y);
            }
        }
        if t == horizon + 1 {
            break;
        }
        let mut next = Vec::with_capacity(states.len() * 4);
        for (mut path, p) in states {
            if p == 0.0 {
                continue;
            }
            for_covariates(spec, &mut path, t, &mut |path, pl| {
                let env = path.env(None);
                let g = spec.steps[t - 1].exposure.pmf(&env)?;
                for (a, ga) in g.into_iter().enumerate() {
                    if ga == 0.0 {
                        continue;
                    }
                    let image = if censored { alloc::vec![(a as f64, 1.0)] } else { policy.image_law(a as f64, path)? };
                    for (ad, pd) in image {
                        let keep = match (&spec.steps[t - 1].censoring, censored) {
                            (Some(law), true) => law.prob_one(&path.env(Some(ad)))?,
                            _ => 1.0,
                        };
                        let mass = p * pl * ga * pd * keep;
                        if mass > 0.0 {
                            let mut child = path.clone();
                            child.a.push(ad);
                            next.push((child, mass));
                        }
                    }
                }
                Ok(())
            })?;
        }
        states = next;
    }
    Ok(absorbed)
}

/// Exact `theta` at `horizon` by forward propagation.
pub fn forward_truth(spec: &DgpSpec, policy: &dyn Policy, horizon: usize) -> Result<f64> {
    forward(spec, policy, horizon, false)
}

/// Probability that the recorded final outcome is 1 in the observed world
/// (censored units record 0).
pub fn observed_outcome_probability(spec: &DgpSpec) -> Result<f64> {
    forward(spec, &crate::policy::Identity, spec.tau, true)
}

/// Nuisances evaluated along enumerated paths: the outcome regression
/// `q_t(a, h)` and the weight `w_t(a, h)` applied to units that remain on
/// study (density ratio over censoring probability).
pub trait PathNuisance {
    fn q(&self, a: f64, h: &dyn History) -> Result<f64>;
    fn w(&self, a: f64, h: &dyn History) -> Result<f64>;
}

/// The true nuisances of a spec.
pub struct ExactNuisance<'a> {
    pub regression: ExactRegression<'a>,
}

impl<'a> ExactNuisance<'a> {
    pub fn new(spec: &'a DgpSpec, policy: &'a dyn Policy, horizon: usize) -> Result<Self> {
        Ok(Self { regression: ExactRegression::new(spec, policy, horizon)? })
    }
}

impl PathNuisance for ExactNuisance<'_> {
    fn q(&self, a: f64, h: &dyn History) -> Result<f64> {
        self.regression.q(a, h)
    }

    fn w(&self, a: f64, h: &dyn History) -> Result<f64> {
        let spec = self.regression.spec;
        let g = spec.exposure_pmf(h)?;
        let gd = discrete_post_intervention_pmf(self.regression.policy, &g, h)?;
        let k = a as usize;
        if g[k] == 0.0 {
            return Err(Error::InvalidArgument(format!("exposure {a} has zero probability")));
        }
        Ok(gd[k] / g[k] / spec.censoring_prob(a, h)?)
    }
}

/// Nuisances distorted from a base: `q` and `w` multiplied by fixed
/// factors, or `q` replaced by a constant.
pub struct Perturbed<'a> {
    pub base: &'a dyn PathNuisance,
    pub q_scale: f64,
    pub w_scale: f64,
    pub q_constant: Option<f64>,
}

impl<'a> Perturbed<'a> {
    pub fn scaled(base: &'a dyn PathNuisance, q_scale: f64, w_scale: f64) -> Self {
        Self { base, q_scale, w_scale, q_constant: None }
    }

    pub fn constant_q(base: &'a dyn PathNuisance, value: f64) -> Self {
        Self { base, q_scale: 1.0, w_scale: 1.0, q_constant: Some(value) }
    }
}

impl PathNuisance for Perturbed<'_> {
    fn q(&self, a: f64, h: &dyn History) -> Result<f64> {
        match self.q_constant {
            Some(v) => Ok(v),
            None => Ok(self.q_scale * self.base.q(a, h)?),
        }
    }

    fn w(&self, a: f64, h: &dyn History) -> Result<f64> {
        Ok(self.w_scale * self.base.w(a, h)?)
    }
}

/// Expectations in the observed world (natural exposures, censoring) of
/// the pseudo-outcomes built from arbitrary nuisances.
pub struct ObservedLaw<'a> {
    spec: &'a DgpSpec,
    policy: &'a dyn Policy,
    horizon: usize,
}

impl<'a> ObservedLaw<'a> {
    pub fn new(spec: &'a DgpSpec, policy: &'a dyn Policy, horizon: usize) -> Result<Self> {
        check_enumerable(spec, policy, horizon)?;
        Ok(Self { spec, policy, horizon })
    }

    /// `E[phi_t | H_t = path]` for a unit on study and at risk at `t`,
    /// with `L_t` already in `path`.
    fn expected_phi(&self, path: &mut Path, nuisance: &dyn PathNuisance) -> Result<f64> {
        let t = path.t;
        let step = &self.spec.steps[t - 1];
        let g = step.exposure.pmf(&path.env(None))?;
        let mut total = 0.0;
        for (k, ga) in g.into_iter().enumerate() {
            if ga == 0.0 {
                continue;
            }
            let a = k as f64;
            let mut q_d = 0.0;
            for (ad, p) in self.policy.image_law(a, path)? {
                q_d += p * nuisance.q(ad, path)?;
            }
            let stay = match &step.censoring {
                Some(law) => law.prob_one(&path.env(Some(a)))?,
                None => 1.0,
            };
            let mut term = q_d;
            if stay > 0.0 {
                let w = nuisance.w(a, path)?;
                term += stay * w * (self.pseudo_outcome(path, a, nuisance)? - nuisance.q(a, path)?);
            }
            total += ga * term;
        }
        Ok(total)
    }

    /// `E[R_{t+1} phi_{t+1} + (1 - R_{t+1}) Y_{t+1} | C_t = R_t = 1, A_t = a, H_t]`
    /// with `path` at time `t`.
    pub fn conditional_pseudo_outcome(&self, a: f64, h: &dyn History, nuisance: &dyn PathNuisance) -> Result<f64> {
        self.pseudo_outcome(&mut Path::from_history(h), a, nuisance)
    }

    fn pseudo_outcome(&self, path: &mut Path, a: f64, nuisance: &dyn PathNuisance) -> Result<f64> {
        let t = path.t;
        path.a.push(a);
        path.t = t + 1;
        let out = (|| {
            let (p_d, p_y) = event_probs(self.spec, path)?;
            let mut v = (1.0 - p_d) * p_y;
            let survive = (1.0 - p_d) * (1.0 - p_y);
            if t < self.horizon && survive > 0.0 {
                let mut cont = 0.0;
                for_covariates(self.spec, path, t + 1, &mut |path, p| {
                    cont += p * self.expected_phi(path, nuisance)?;
                    Ok(())
                })?;
                v += survive * cont;
            }
            Ok(v)
        })();
        path.t = t;
        path.a.pop();
        out
    }

    /// `E[phi_1(Z; nuisance)]`.
    pub fn expected_phi1(&self, nuisance: &dyn PathNuisance) -> Result<f64> {
        let mut total = 0.0;
        for_covariates(self.spec, &mut Path::default(), 0, &mut |path, pw| {
            let mut path = path.clone();
            for_covariates(self.spec, &mut path, 1, &mut |path, pl| {
                total += pw * pl * self.expected_phi(path, nuisance)?;
                Ok(())
            })
        })?;
        Ok(total)
    }

    /// Every `(h_t, a_t)` cell with positive probability of
    /// `C_t = R_t = 1` in the observed world, for `t` in `1..=horizon`.
    pub fn cells(&self, t: usize) -> Result<Vec<(Path, f64)>> {
        let mut out = Vec::new();
        self.walk(&mut Path::default(), 0, t, &mut out)?;
        Ok(out)
    }

    fn walk(&self, path: &mut Path, s: usize, target: usize, out: &mut Vec<(Path, f64)>) -> Result<()> {
        if s == 0 {
            return for_covariates(self.spec, path, 0, &mut |path, _| {
                let mut p = path.clone();
                self.walk(&mut p, 1, target, out)
            });
        }
        if s >= 2 {
            path.t = s;
            let (p_d, p_y) = event_probs(self.spec, path)?;
            if (1.0 - p_d) * (1.0 - p_y) == 0.0 {
                return Ok(());
            }
        }
        for_covariates(self.spec, path, s, &mut |path, _| {
            let step = &self.spec.steps[s - 1];
            let g = step.exposure.pmf(&path.env(None))?;
            for (k, ga) in g.into_iter().enumerate() {
                let a = k as f64;
                let stay = match &step.censoring {
                    Some(law) => law.prob_one(&path.env(Some(a)))?,
                    None => 1.0,
                };
                if ga == 0.0 || stay == 0.0 {
                    continue;
                }
                if s == target {
                    out.push((path.clone(), a));
                } else {
                    let mut child = path.clone();
                    child.a.push(a);
                    self.walk(&mut child, s + 1, target, out)?;
                }
            }
            Ok(())
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Largest cell-wise gap `|E[pseudo-outcome(nuisance) | cell] - q_t(cell)|`
/// over every time and cell.
pub fn pseudo_outcome_gap(spec: &DgpSpec, policy: &dyn Policy, horizon: usize, nuisance: &dyn PathNuisance) -> Result<f64> {
    let law = ObservedLaw::new(spec, policy, horizon)?;
    let exact = ExactRegression::new(spec, policy, horizon)?;
    let mut gap: f64 = 0.0;
    for t in 1..=horizon {
        for (h, a) in law.cells(t)? {
            let v = law.conditional_pseudo_outcome(a, &h, nuisance)?;
            gap = gap.max((v - exact.q(a, &h)?).abs());
        }
    }
    Ok(gap)
}

/// `E[phi_1(Z; nuisance_h)] - theta` where both the outcome regressions
/// and the weights of the true nuisances are multiplied by `1 + h`.
pub fn joint_perturbation_bias(spec: &DgpSpec, policy: &dyn Policy, horizon: usize, h: f64) -> Result<f64> {
    let exact = ExactNuisance::new(spec, policy, horizon)?;
    let theta = exact.regression.theta()?;
    let law = ObservedLaw::new(spec, policy, horizon)?;
    let perturbed = Perturbed::scaled(&exact, 1.0 + h, 1.0 + h);
    Ok(law.expected_phi1(&perturbed)? - theta)
}
