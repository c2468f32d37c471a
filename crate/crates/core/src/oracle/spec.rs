//! Structural-equation specification of a longitudinal data generating
//! process with known conditional laws.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::slice;

use rand_core::RngCore;

use crate::data::History;
use crate::error::{Error, Result};
use crate::rng::{standard_normal, uniform};
use crate::stats::expit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Var {
    /// Baseline covariate.
    W,
    /// Time-varying covariate.
    L,
    /// Exposure.
    A,
}

/// Reference to `var` at time `now - lag`, column `index`. Times at or
/// below zero evaluate to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarRef {
    pub var: Var,
    #[cfg_attr(feature = "serde", serde(default))]
    pub lag: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Term {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub at: VarRef,
    pub coef: f64,
}

/// Categorical law over `0..K` keyed by the values of `parents`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawTable", into = "RawTable"))]
pub struct Table {
    pub parents: Vec<VarRef>,
    pub probs: BTreeMap<Vec<i64>, Vec<f64>>,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct RawTable {
    parents: Vec<VarRef>,
    /// Keys are comma-separated parent values, e.g. `"0,1"`; the empty
    /// string keys a table without parents.
    probs: BTreeMap<String, Vec<f64>>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawTable> for Table {
    type Error = String;

    fn try_from(raw: RawTable) -> core::result::Result<Self, String> {
        let mut probs = BTreeMap::new();
        for (k, v) in raw.probs {
            let key = if k.trim().is_empty() {
                Vec::new()
            } else {
                k.split(',')
                    .map(|s| s.trim().parse::<i64>().map_err(|_| format!("bad table key `{k}`")))
                    .collect::<core::result::Result<Vec<_>, _>>()?
            };
            probs.insert(key, v);
        }
        Ok(Table { parents: raw.parents, probs })
    }
}

#[cfg(feature = "serde")]
impl From<Table> for RawTable {
    fn from(t: Table) -> Self {
        let probs = t
            .probs
            .into_iter()
            .map(|(k, v)| {
                let key: Vec<String> = k.iter().map(|x| format!("{x}")).collect();
                (key.join(","), v)
            })
            .collect();
        RawTable { parents: t.parents, probs }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Law {
    Bernoulli { p: f64 },
    /// Bernoulli with `logit p = intercept + sum(coef * value)`.
    Logistic {
        intercept: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        terms: Vec<Term>,
    },
    Table(Table),
    Gaussian {
        intercept: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        terms: Vec<Term>,
        sd: f64,
    },
}

/// Values visible to a law evaluated at time `now`: the history `h`
/// (with `h.time() == now`) plus the current exposure when already drawn.
pub(crate) struct Env<'a> {
    pub h: &'a dyn History,
    pub now: usize,
    pub current_a: Option<f64>,
}

impl Env<'_> {
    fn value(&self, r: &VarRef) -> f64 {
        let at = |v: &[f64], j: usize| v.get(j).copied().unwrap_or(0.0);
        match r.var {
            Var::W => at(self.h.baseline(), r.index),
            Var::L => match self.now.checked_sub(r.lag) {
                Some(s) if s >= 1 => at(self.h.covariates(s), r.index),
                _ => 0.0,
            },
            Var::A => match self.now.checked_sub(r.lag) {
                Some(s) if s >= 1 && s == self.now => self.current_a.unwrap_or(0.0),
                Some(s) if s >= 1 => at(self.h.exposure(s), 0),
                _ => 0.0,
            },
        }
    }

    fn linear(&self, intercept: f64, terms: &[Term]) -> f64 {
        intercept + terms.iter().map(|t| t.coef * self.value(&t.at)).sum::<f64>()
    }
}

impl Law {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, Law::Gaussian { .. })
    }

    /// Number of support points for discrete laws.
    pub fn levels(&self) -> Option<usize> {
        match self {
            Law::Bernoulli { .. } | Law::Logistic { .. } => Some(2),
            Law::Table(t) => t.probs.values().next().map(Vec::len),
            Law::Gaussian { .. } => None,
        }
    }

    /// Probability mass over `0..levels`.
    pub(crate) fn pmf(&self, env: &Env<'_>) -> Result<Vec<f64>> {
        match self {
            Law::Bernoulli { p } => Ok(vec![1.0 - p, *p]),
            Law::Logistic { intercept, terms } => {
                let p = expit(env.linear(*intercept, terms));
                Ok(vec![1.0 - p, p])
            }
            Law::Table(t) => {
                let key: Vec<i64> = t.parents.iter().map(|r| env.value(r) as i64).collect();
                t.probs
                    .get(&key)
                    .cloned()
                    .ok_or_else(|| Error::InvalidSpec(format!("table has no row for parent values {key:?}")))
            }
            Law::Gaussian { .. } => Err(Error::Unsupported("pmf of a continuous law".into())),
        }
    }

    /// `P(value = 1)` for binary laws.
    pub(crate) fn prob_one(&self, env: &Env<'_>) -> Result<f64> {
        match self {
            Law::Bernoulli { p } => Ok(*p),
            Law::Logistic { intercept, terms } => Ok(expit(env.linear(*intercept, terms))),
            _ => {
                let p = self.pmf(env)?;
                if p.len() != 2 {
                    return Err(Error::InvalidSpec("event law must be binary".into()));
                }
                Ok(p[1])
            }
        }
    }

    pub(crate) fn sample<R: RngCore>(&self, env: &Env<'_>, rng: &mut R) -> Result<f64> {
        match self {
            Law::Gaussian { intercept, terms, sd } => Ok(env.linear(*intercept, terms) + sd * standard_normal(rng)),
            Law::Bernoulli { .. } | Law::Logistic { .. } => {
                let p = self.prob_one(env)?;
                Ok(f64::from(u8::from(uniform(rng) < p)))
            }
            Law::Table(_) => {
                let p = self.pmf(env)?;
                let u = uniform(rng);
                let mut acc = 0.0;
                for (k, pk) in p.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        return Ok(k as f64);
                    }
                }
                Ok((p.len() - 1) as f64)
            }
        }
    }

    fn references(&self) -> Vec<VarRef> {
        match self {
            Law::Bernoulli { .. } => Vec::new(),
            Law::Logistic { terms, .. } | Law::Gaussian { terms, .. } => terms.iter().map(|t| t.at).collect(),
            Law::Table(t) => t.parents.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Step {
    /// Law of `D_t` among units at risk; absent means no competing events.
    #[cfg_attr(feature = "serde", serde(default))]
    pub competing: Option<Law>,
    /// Law of `Y_t` among units at risk without a competing event at `t`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub outcome: Option<Law>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub covariates: Vec<Law>,
    pub exposure: Law,
    /// Law of `C_t` (1 = stays on study); absent means no censoring.
    #[cfg_attr(feature = "serde", serde(default))]
    pub censoring: Option<Law>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EndStep {
    /// Competing event at `tau + 1`; it only blocks the outcome and is not
    /// recorded.
    #[cfg_attr(feature = "serde", serde(default))]
    pub competing: Option<Law>,
    pub outcome: Law,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DgpSpec {
    pub tau: usize,
    /// `Some(K)` for exposures coded `0..K`, `None` for continuous ones.
    #[cfg_attr(feature = "serde", serde(default))]
    pub exposure_levels: Option<usize>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub baseline: Vec<Law>,
    pub steps: Vec<Step>,
    pub end: EndStep,
}

impl DgpSpec {
    pub fn exposure_kind(&self) -> crate::data::ExposureKind {
        match self.exposure_levels {
            Some(levels) => crate::data::ExposureKind::Discrete { levels },
            None => crate::data::ExposureKind::Continuous,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.exposure_levels.is_some()
            && self.baseline.iter().all(Law::is_discrete)
            && self.steps.iter().all(|s| s.covariates.iter().all(Law::is_discrete))
    }

    /// Law used for `(D, Y)` at time `time` in `2..=tau + 1`.
    pub(crate) fn event_laws(&self, time: usize) -> (Option<&Law>, Option<&Law>) {
        if time == self.tau + 1 {
            (self.end.competing.as_ref(), Some(&self.end.outcome))
        } else {
            let s = &self.steps[time - 1];
            (s.competing.as_ref(), s.outcome.as_ref())
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.tau == 0 || self.steps.len() != self.tau {
            return bad(format!("tau = {} with {} steps", self.tau, self.steps.len()));
        }
        if self.steps[0].competing.is_some() || self.steps[0].outcome.is_some() {
            return bad("no events may occur at the first time point".into());
        }
        let width = |t: usize| if t == 0 { self.baseline.len() } else { self.steps[t - 1].covariates.len() };
        // (law, time, what, L columns already drawn at `time`, exposure drawn at `time`)
        let mut laws: Vec<(&Law, usize, String, usize, bool)> = Vec::new();
        for (j, law) in self.baseline.iter().enumerate() {
            if !law.references().is_empty() {
                return bad(format!("baseline law {j} may not reference other variables"));
            }
            laws.push((law, 0, format!("W{j}"), 0, false));
        }
        for (k, s) in self.steps.iter().enumerate() {
            let t = k + 1;
            for (what, law) in [("D", &s.competing), ("Y", &s.outcome)] {
                if let Some(law) = law {
                    laws.push((law, t, format!("{what}{t}"), 0, false));
                }
            }
            for (j, law) in s.covariates.iter().enumerate() {
                laws.push((law, t, format!("L{t}_{j}"), j, false));
            }
            laws.push((&s.exposure, t, format!("A{t}"), s.covariates.len(), false));
            if let Some(law) = &s.censoring {
                laws.push((law, t, format!("C{t}"), s.covariates.len(), true));
            }
        }
        let end_t = self.tau + 1;
        if let Some(law) = &self.end.competing {
            laws.push((law, end_t, format!("D{end_t}"), 0, false));
        }
        laws.push((&self.end.outcome, end_t, format!("Y{end_t}"), 0, false));

        for (law, t, what, drawn_l, drawn_a) in laws {
            for r in law.references() {
                let ok = match r.var {
                    Var::W => r.index < self.baseline.len(),
                    Var::L => {
                        if r.lag == 0 {
                            t >= 1 && t <= self.tau && r.index < drawn_l
                        } else {
                            t <= r.lag || r.index < width(t - r.lag)
                        }
                    }
                    Var::A => r.lag > 0 || drawn_a,
                };
                if !ok {
                    return bad(format!("{what} references {r:?}, which is not available"));
                }
            }
            match law {
                Law::Bernoulli { p } if !(0.0..=1.0).contains(p) => return bad(format!("{what}: p = {p}")),
                Law::Gaussian { sd, .. } if !(*sd > 0.0) => return bad(format!("{what}: sd = {sd}")),
                Law::Table(tab) => {
                    if tab.probs.is_empty() {
                        return bad(format!("{what}: empty table"));
                    }
                    let k = tab.probs.values().next().map_or(0, Vec::len);
                    for (key, p) in &tab.probs {
                        if key.len() != tab.parents.len() || p.len() != k {
                            return bad(format!("{what}: malformed row {key:?}"));
                        }
                        if p.iter().any(|v| !(0.0..=1.0).contains(v)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                            return bad(format!("{what}: row {key:?} is not a distribution"));
                        }
                    }
                }
                _ => {}
            }
            let binary = what.starts_with('D') || what.starts_with('Y') || what.starts_with('C');
            if binary && law.levels() != Some(2) {
                return bad(format!("{what} must be binary"));
            }
        }
        for (k, s) in self.steps.iter().enumerate() {
            match (self.exposure_levels, s.exposure.levels()) {
                (Some(levels), Some(l)) if levels == l => {}
                (None, None) => {}
                _ => return bad(format!("exposure law at t={} does not match exposure_levels", k + 1)),
            }
        }
        Ok(())
    }
}

/// One unit's trajectory while it is generated or enumerated; doubles as
/// the history at its current time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Path {
    pub t: usize,
    pub w: Vec<f64>,
    pub l: Vec<Vec<f64>>,
    pub a: Vec<f64>,
}

impl History for Path {
    fn time(&self) -> usize {
        self.t
    }

    fn baseline(&self) -> &[f64] {
        &self.w
    }

    fn covariates(&self, s: usize) -> &[f64] {
        if s == 0 || s > self.t {
            return &[];
        }
        self.l.get(s - 1).map_or(&[], Vec::as_slice)
    }

    fn exposure(&self, s: usize) -> &[f64] {
        if s == 0 || s >= self.t {
            return &[];
        }
        self.a.get(s - 1).map_or(&[], slice::from_ref)
    }
}

impl Path {
    pub(crate) fn env(&self, current_a: Option<f64>) -> Env<'_> {
        Env { h: self, now: self.t, current_a }
    }

    /// Copy of a history truncated to its own time.
    pub fn from_history(h: &dyn History) -> Self {
        let t = h.time();
        Path {
            t,
            w: h.baseline().to_vec(),
            l: (1..=t).map(|s| h.covariates(s).to_vec()).collect(),
            a: (1..t).map(|s| h.exposure(s).first().copied().unwrap_or(0.0)).collect(),
        }
    }
}
