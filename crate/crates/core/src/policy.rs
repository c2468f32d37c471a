//! Modified treatment policies `d(a_t, h_t, eps_t)`.
//!
//! A policy maps the natural exposure value at time `t = h.time()` and the
//! history to the intervened value. All randomness enters through
//! `eps ~ Uniform(0, 1)`, supplied by the caller from a [`Randomizer`].
//! Policies never look at the data distribution.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::data::{ExposureKind, History, LongitudinalDataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, keyed_uniform, tag};

/// One branch of the piecewise inverse of a policy at a point `y`:
/// `d(preimage) = y` with local Jacobian `jacobian = |b'(y)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversePiece {
    pub preimage: f64,
    pub jacobian: f64,
}

pub trait Policy: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// Intervened value at time `h.time()`. Scalar exposures only, except
    /// for policies that override [`Policy::apply_vector`].
    fn apply(&self, a: f64, h: &dyn History, eps: f64) -> Result<f64>;

    /// Vector form. The default requires a single exposure column.
    fn apply_vector(&self, a: &[f64], h: &dyn History, eps: f64, out: &mut [f64]) -> Result<()> {
        if a.len() != 1 {
            return Err(Error::Unsupported(format!(
                "policy `{}` acts on scalar exposures, got width {}",
                self.name(),
                a.len()
            )));
        }
        out[0] = self.apply(a[0], h, eps)?;
        Ok(())
    }

    fn uses_randomizer(&self) -> bool {
        false
    }

    /// True when `d(a, h, eps) = a` for every input.
    fn is_identity(&self) -> bool {
        false
    }

    /// Rejects exposure kinds the policy is not defined for.
    fn check_kind(&self, _kind: &ExposureKind) -> Result<()> {
        Ok(())
    }

    /// Law of `d(a, h, eps)` over `eps` for a fixed natural value `a`, as
    /// `(value, probability)` pairs.
    fn image_law(&self, a: f64, h: &dyn History) -> Result<Vec<(f64, f64)>> {
        if self.uses_randomizer() {
            return Err(Error::Unsupported(format!(
                "policy `{}` has no closed-form image law",
                self.name()
            )));
        }
        Ok(vec![(self.apply(a, h, 0.5)?, 1.0)])
    }

    /// Piecewise inverse at `y`, for densities of continuous exposures.
    fn inverse_pieces(&self, _y: f64, _h: &dyn History) -> Option<Vec<InversePiece>> {
        None
    }
}

fn require_levels(name: &str, kind: &ExposureKind, levels: usize) -> Result<()> {
    match kind {
        ExposureKind::Discrete { levels: k } if *k == levels => Ok(()),
        _ => Err(Error::KindMismatch(format!(
            "{name} needs a discrete exposure with {levels} levels, got {kind:?}"
        ))),
    }
}

fn require_level_value(name: &str, a: f64, levels: usize) -> Result<usize> {
    if a >= 0.0 && a < levels as f64 && libm::trunc(a) == a {
        Ok(a as usize)
    } else {
        Err(Error::KindMismatch(format!(
            "{name} expects an exposure in 0..{levels}, got {a}"
        )))
    }
}

/// A bound `u_t(h_t)` or `l_t(h_t)` evaluated from the history.
#[derive(Clone, Default)]
pub enum Bound {
    /// `+inf` as an upper bound, `-inf` as a lower bound.
    #[default]
    Unbounded,
    Constant(f64),
    /// Column of the baseline covariates.
    Baseline(usize),
    /// Column of the current covariate block `L_t`.
    Covariate(usize),
    Custom(Arc<dyn Fn(&dyn History) -> f64 + Send + Sync>),
}

impl fmt::Debug for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Unbounded => f.write_str("Unbounded"),
            Bound::Constant(v) => write!(f, "Constant({v})"),
            Bound::Baseline(j) => write!(f, "Baseline({j})"),
            Bound::Covariate(j) => write!(f, "Covariate({j})"),
            Bound::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Bound {
    fn eval(&self, h: &dyn History, unbounded: f64) -> Result<f64> {
        let column = |v: &[f64], j: usize, what: &str| {
            v.get(j).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("bound column {j} absent from {what} at t={}", h.time()))
            })
        };
        match self {
            Bound::Unbounded => Ok(unbounded),
            Bound::Constant(v) => Ok(*v),
            Bound::Baseline(j) => column(h.baseline(), *j, "baseline"),
            Bound::Covariate(j) => column(h.covariates(h.time()), *j, "covariates"),
            Bound::Custom(f) => Ok(f(h)),
        }
    }

    pub fn upper(&self, h: &dyn History) -> Result<f64> {
        self.eval(h, f64::INFINITY)
    }

    pub fn lower(&self, h: &dyn History) -> Result<f64> {
        self.eval(h, f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Policy for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn apply(&self, a: f64, _h: &dyn History, _eps: f64) -> Result<f64> {
        Ok(a)
    }

    fn apply_vector(&self, a: &[f64], _h: &dyn History, _eps: f64, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(a);
        Ok(())
    }

    fn is_identity(&self) -> bool {
        true
    }

    fn inverse_pieces(&self, y: f64, _h: &dyn History) -> Option<Vec<InversePiece>> {
        Some(vec![InversePiece { preimage: y, jacobian: 1.0 }])
    }
}

/// Sets the exposure to a fixed value at every time.
#[derive(Debug, Clone, Copy)]
pub struct Static {
    pub value: f64,
}

impl Policy for Static {
    fn name(&self) -> String {
        format!("static({})", self.value)
    }

    fn apply(&self, _a: f64, _h: &dyn History, _eps: f64) -> Result<f64> {
        Ok(self.value)
    }

    fn check_kind(&self, kind: &ExposureKind) -> Result<()> {
        if kind.contains(self.value) {
            Ok(())
        } else {
            Err(Error::KindMismatch(format!("static value {} outside {kind:?}", self.value)))
        }
    }
}

/// `a + delta` when that stays at or below `u_t(h_t)`, otherwise `a`.
#[derive(Debug, Clone)]
pub struct AdditiveShift {
    pub delta: f64,
    pub upper: Bound,
}

impl AdditiveShift {
    pub fn new(delta: f64, upper: Bound) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("shift must be finite, got {delta}")));
        }
        Ok(Self { delta, upper })
    }
}

impl Policy for AdditiveShift {
    fn name(&self) -> String {
        format!("additive({})", self.delta)
    }

    fn apply(&self, a: f64, h: &dyn History, _eps: f64) -> Result<f64> {
        let u = self.upper.upper(h)?;
        Ok(if a + self.delta <= u { a + self.delta } else { a })
    }

    fn is_identity(&self) -> bool {
        self.delta == 0.0
    }

    fn inverse_pieces(&self, y: f64, h: &dyn History) -> Option<Vec<InversePiece>> {
        let u = self.upper.upper(h).ok()?;
        let mut pieces = Vec::with_capacity(2);
        let shifted = y - self.delta;
        if shifted + self.delta <= u {
            pieces.push(InversePiece { preimage: shifted, jacobian: 1.0 });
        }
        if y + self.delta > u {
            pieces.push(InversePiece { preimage: y, jacobian: 1.0 });
        }
        Some(pieces)
    }
}

/// `a * delta` when that stays at or above `l_t(h_t)`, otherwise `a`.
#[derive(Debug, Clone)]
pub struct MultiplicativeShift {
    pub delta: f64,
    pub lower: Bound,
}

impl MultiplicativeShift {
    pub fn new(delta: f64, lower: Bound) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "multiplicative shift needs 0 < delta < 1, got {delta}"
            )));
        }
        Ok(Self { delta, lower })
    }
}

impl Policy for MultiplicativeShift {
    fn name(&self) -> String {
        format!("multiplicative({})", self.delta)
    }

    fn apply(&self, a: f64, h: &dyn History, _eps: f64) -> Result<f64> {
        let l = self.lower.lower(h)?;
        Ok(if a * self.delta >= l { a * self.delta } else { a })
    }

    fn inverse_pieces(&self, y: f64, h: &dyn History) -> Option<Vec<InversePiece>> {
        let l = self.lower.lower(h).ok()?;
        let mut pieces = Vec::with_capacity(2);
        if y * self.delta < l {
            pieces.push(InversePiece { preimage: y, jacobian: 1.0 });
        }
        if y >= l {
            pieces.push(InversePiece { preimage: y / self.delta, jacobian: 1.0 / self.delta });
        }
        Some(pieces)
    }
}

/// Incremental propensity intervention on the risk-ratio scale: keeps a
/// binary exposure when `eps < delta`, otherwise sets it to 0.
#[derive(Debug, Clone, Copy)]
pub struct IpsiRiskRatio {
    pub delta: f64,
}

impl IpsiRiskRatio {
    pub fn new(delta: f64) -> Result<Self> {
        if delta > 1.0 && delta.is_finite() {
            return Err(Error::Unsupported(format!(
                "risk-ratio intervention with delta = {delta} > 1 has no draw form"
            )));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("risk-ratio delta must lie in (0, 1], got {delta}")));
        }
        Ok(Self { delta })
    }
}

impl Policy for IpsiRiskRatio {
    fn name(&self) -> String {
        format!("ipsi_rr({})", self.delta)
    }

    fn apply(&self, a: f64, _h: &dyn History, eps: f64) -> Result<f64> {
        require_level_value("ipsi_rr", a, 2)?;
        Ok(if eps < self.delta { a } else { 0.0 })
    }

    fn uses_randomizer(&self) -> bool {
        true
    }

    fn is_identity(&self) -> bool {
        self.delta == 1.0
    }

    fn check_kind(&self, kind: &ExposureKind) -> Result<()> {
        require_levels("ipsi_rr", kind, 2)
    }

    fn image_law(&self, a: f64, _h: &dyn History) -> Result<Vec<(f64, f64)>> {
        Ok(match require_level_value("ipsi_rr", a, 2)? {
            0 => vec![(0.0, 1.0)],
            _ => vec![(1.0, self.delta), (0.0, 1.0 - self.delta)],
        })
    }
}

/// Forces treatment at `t` when the binary covariate `column` of
/// `L_{t - m}` equals 1; otherwise keeps the natural value.
#[derive(Debug, Clone, Copy)]
pub struct GracePeriod {
    pub m: usize,
    pub column: usize,
}

impl Policy for GracePeriod {
    fn name(&self) -> String {
        format!("grace(m={}, column={})", self.m, self.column)
    }

    fn apply(&self, a: f64, h: &dyn History, _eps: f64) -> Result<f64> {
        require_level_value("grace", a, 2)?;
        let t = h.time();
        if t <= self.m {
            return Ok(a);
        }
        let block = h.covariates(t - self.m);
        let flag = block.get(self.column).copied().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "condition column {} absent from covariates at t={}",
                self.column,
                t - self.m
            ))
        })?;
        Ok(if flag == 1.0 { 1.0 } else { a })
    }

    fn check_kind(&self, kind: &ExposureKind) -> Result<()> {
        require_levels("grace", kind, 2)
    }
}

/// Three-level exposure (0, 1, 2): the first occurrence of level 2 in the
/// supplied history is downgraded to level 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct DelayIntubation;

impl Policy for DelayIntubation {
    fn name(&self) -> String {
        "delay_intubation".into()
    }

    fn apply(&self, a: f64, h: &dyn History, _eps: f64) -> Result<f64> {
        if require_level_value("delay_intubation", a, 3)? != 2 {
            return Ok(a);
        }
        let first = (1..h.time()).all(|s| h.exposure(s).first().is_none_or(|&v| v <= 1.0));
        Ok(if first { 1.0 } else { a })
    }

    fn check_kind(&self, kind: &ExposureKind) -> Result<()> {
        require_levels("delay_intubation", kind, 3)
    }
}

/// Pattern over past exposures `A_1..A_{t-1}`; `None` entries match
/// anything.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryPattern {
    Any,
    Exact(Vec<Option<f64>>),
}

impl HistoryPattern {
    /// `*` matches any history; otherwise a `|`-separated list of past
    /// exposures, each a number or `*`. The empty string matches the empty
    /// history.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "*" {
            return Ok(HistoryPattern::Any);
        }
        if s.is_empty() {
            return Ok(HistoryPattern::Exact(Vec::new()));
        }
        s.split('|')
            .map(|tok| match tok.trim() {
                "*" => Ok(None),
                v => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::InvalidArgument(format!("bad history pattern entry `{v}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(HistoryPattern::Exact)
    }

    pub fn matches(&self, h: &dyn History) -> bool {
        match self {
            HistoryPattern::Any => true,
            HistoryPattern::Exact(entries) => {
                entries.len() + 1 == h.time()
                    && entries.iter().enumerate().all(|(k, e)| {
                        e.is_none_or(|v| h.exposure(k + 1).first().is_some_and(|&x| x == v))
                    })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularRule {
    /// `None` applies at every time.
    pub t: Option<usize>,
    pub history: HistoryPattern,
    pub a: f64,
    pub a_d: f64,
}

/// User-supplied lookup `(t, history pattern, a) -> a^d`. The first
/// matching rule wins; unmatched inputs keep their natural value.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabular {
    pub rules: Vec<TabularRule>,
}

impl Policy for Tabular {
    fn name(&self) -> String {
        format!("custom({} rules)", self.rules.len())
    }

    fn apply(&self, a: f64, h: &dyn History, _eps: f64) -> Result<f64> {
        let t = h.time();
        Ok(self
            .rules
            .iter()
            .find(|r| r.t.is_none_or(|rt| rt == t) && r.a == a && r.history.matches(h))
            .map_or(a, |r| r.a_d))
    }

    fn check_kind(&self, kind: &ExposureKind) -> Result<()> {
        if let ExposureKind::Continuous = kind {
            return Err(Error::KindMismatch("custom tabular policies need a discrete exposure".into()));
        }
        match self.rules.iter().find(|r| !kind.contains(r.a_d)) {
            Some(r) => Err(Error::KindMismatch(format!("custom policy maps to {} outside {kind:?}", r.a_d))),
            None => Ok(()),
        }
    }
}

/// Exact law of `A^d_t` given `h` for a discrete exposure with natural pmf
/// `base` over `0..K`, integrating the randomizer analytically.
pub fn discrete_post_intervention_pmf(policy: &dyn Policy, base: &[f64], h: &dyn History) -> Result<Vec<f64>> {
    let k = base.len();
    let mut out = vec![0.0; k];
    for (s, &p) in base.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (v, q) in policy.image_law(s as f64, h)? {
            let idx = require_level_value(&policy.name(), v, k)?;
            out[idx] += p * q;
        }
    }
    Ok(out)
}

/// Density of `A^d_t` at `y` given `h`, for a deterministic policy with a
/// piecewise smooth inverse and natural density `base`.
pub fn continuous_post_intervention_density(
    policy: &dyn Policy,
    base: &dyn Fn(f64) -> f64,
    h: &dyn History,
    y: f64,
) -> Result<f64> {
    if policy.uses_randomizer() {
        return Err(Error::Unsupported("densities of randomized policies".into()));
    }
    let pieces = policy
        .inverse_pieces(y, h)
        .ok_or_else(|| Error::Unsupported(format!("policy `{}` has no inverse specification", policy.name())))?;
    Ok(pieces.iter().map(|p| base(p.preimage) * p.jacobian.abs()).sum())
}

/// Pre-drawn `eps(unit, t)` values, shared by every step that evaluates
/// the policy so that all of them see the same draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Randomizer {
    draws: Vec<Vec<f64>>,
}

impl Randomizer {
    pub fn new(seed: u64, n: usize, tau: usize) -> Self {
        let key = derive_seed(seed, tag::RANDOMIZER);
        let draws = (1..=tau)
            .map(|t| (0..n).map(|i| Self::draw(key, i, t)).collect())
            .collect();
        Self { draws }
    }

    /// The keyed draw without a cache, for callers that walk units lazily.
    pub fn keyed(seed: u64, unit: usize, t: usize) -> f64 {
        Self::draw(derive_seed(seed, tag::RANDOMIZER), unit, t)
    }

    fn draw(key: u64, unit: usize, t: usize) -> f64 {
        keyed_uniform(key, unit as u64, t as u64)
    }

    pub fn get(&self, unit: usize, t: usize) -> f64 {
        self.draws[t - 1][unit]
    }
}

/// `A^d_t = d(A_t, H_t, eps_t)` for every unit at risk at `t`; other rows
/// keep their observed (null) value.
pub fn intervened_exposure(
    data: &LongitudinalDataset,
    policy: &dyn Policy,
    t: usize,
    randomizer: &Randomizer,
) -> Result<Matrix> {
    let observed = data.exposure(t);
    let mut out = observed.clone();
    if policy.is_identity() {
        return Ok(out);
    }
    for i in 0..data.n() {
        if !data.at_risk(i, t) {
            continue;
        }
        let h = data.unit_history(i, t);
        policy.apply_vector(observed.row(i), &h, randomizer.get(i, t), out.row_mut(i))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::OwnedHistory;

    fn h0() -> OwnedHistory {
        OwnedHistory::empty(1)
    }

    #[test]
    fn identity_and_additive_shift() {
        assert_eq!(Identity.apply(7.3, &h0(), 0.1).unwrap(), 7.3);
        let p = AdditiveShift::new(1.0, Bound::Constant(4.0)).unwrap();
        assert_eq!(p.apply(2.0, &h0(), 0.0).unwrap(), 3.0);
        assert_eq!(p.apply(4.0, &h0(), 0.0).unwrap(), 4.0);
        assert_eq!(p.apply(3.0, &h0(), 0.0).unwrap(), 4.0);
    }

    #[test]
    fn multiplicative_shift_cases() {
        let p = MultiplicativeShift::new(0.5, Bound::Constant(3.0)).unwrap();
        assert_eq!(p.apply(10.0, &h0(), 0.0).unwrap(), 5.0);
        assert_eq!(p.apply(4.0, &h0(), 0.0).unwrap(), 4.0);
        assert_eq!(p.apply(6.0, &h0(), 0.0).unwrap(), 3.0);
        assert!(MultiplicativeShift::new(1.0, Bound::Unbounded).is_err());
        assert!(MultiplicativeShift::new(0.0, Bound::Unbounded).is_err());
    }

    #[test]
    fn ipsi_draw_form() {
        let p = IpsiRiskRatio::new(0.5).unwrap();
        assert_eq!(p.apply(1.0, &h0(), 0.3).unwrap(), 1.0);
        assert_eq!(p.apply(1.0, &h0(), 0.7).unwrap(), 0.0);
        for eps in [0.01, 0.49, 0.51, 0.99] {
            assert_eq!(p.apply(0.0, &h0(), eps).unwrap(), 0.0);
        }
        assert!(matches!(p.apply(0.5, &h0(), 0.1), Err(Error::KindMismatch(_))));
        assert!(matches!(IpsiRiskRatio::new(1.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn grace_period_cases() {
        let p = GracePeriod { m: 2, column: 0 };
        let mut h = OwnedHistory::empty(5);
        h.covariates[2] = vec![1.0];
        assert_eq!(p.apply(0.0, &h, 0.0).unwrap(), 1.0);
        h.covariates[2] = vec![0.0];
        assert_eq!(p.apply(0.0, &h, 0.0).unwrap(), 0.0);
        assert_eq!(p.apply(0.0, &OwnedHistory::empty(2), 0.0).unwrap(), 0.0);
        assert!(p.apply(0.0, &OwnedHistory::empty(5), 0.0).is_err());
    }

    #[test]
    fn delay_intubation_cases() {
        let p = DelayIntubation;
        assert_eq!(p.apply(2.0, &OwnedHistory::with_exposures(&[0.0, 1.0]), 0.0).unwrap(), 1.0);
        assert_eq!(p.apply(2.0, &OwnedHistory::with_exposures(&[0.0, 2.0]), 0.0).unwrap(), 2.0);
        assert_eq!(p.apply(1.0, &OwnedHistory::with_exposures(&[0.0, 1.0]), 0.0).unwrap(), 1.0);
        assert!(p.apply(3.0, &h0(), 0.0).is_err());
    }

    #[test]
    fn discrete_pmfs() {
        let ipsi = IpsiRiskRatio::new(0.6).unwrap();
        let gd = discrete_post_intervention_pmf(&ipsi, &[0.5, 0.5], &h0()).unwrap();
        assert!((gd[1] - 0.3).abs() < 1e-15 && (gd[0] - 0.7).abs() < 1e-15);
        let g = [0.1, 0.25, 0.65];
        assert_eq!(discrete_post_intervention_pmf(&Identity, &g, &h0()).unwrap(), g.to_vec());
        let h = OwnedHistory::with_exposures(&[0.0, 1.0]);
        let gd = discrete_post_intervention_pmf(&DelayIntubation, &[0.2, 0.3, 0.5], &h).unwrap();
        assert!((gd[0] - 0.2).abs() < 1e-15 && (gd[1] - 0.8).abs() < 1e-15 && gd[2] == 0.0);
        let gd = discrete_post_intervention_pmf(&ipsi, &[1.0, 0.0], &h0()).unwrap();
        assert_eq!(gd[1], 0.0);
    }

    #[test]
    fn continuous_densities() {
        let phi = |x: f64| crate::stats::normal_pdf(x);
        let add = AdditiveShift::new(1.0, Bound::Unbounded).unwrap();
        let v = continuous_post_intervention_density(&add, &phi, &h0(), 0.3).unwrap();
        assert!((v - phi(-0.7)).abs() < 1e-15);
        let mult = MultiplicativeShift::new(0.5, Bound::Constant(1.0)).unwrap();
        for y in [0.2, 0.7, 1.0, 1.8, 2.5] {
            let expected = phi(y) * f64::from(u8::from(y * 0.5 < 1.0)) + 2.0 * phi(2.0 * y) * f64::from(u8::from(y >= 1.0));
            let got = continuous_post_intervention_density(&mult, &phi, &h0(), y).unwrap();
            assert!((got - expected).abs() < 1e-15, "y={y}");
        }
        assert_eq!(continuous_post_intervention_density(&Identity, &phi, &h0(), 0.4).unwrap(), phi(0.4));
        assert!(continuous_post_intervention_density(&DelayIntubation, &phi, &h0(), 0.4).is_err());
    }

    #[test]
    fn tabular_rules() {
        let p = Tabular {
            rules: vec![
                TabularRule { t: Some(2), history: HistoryPattern::parse("1").unwrap(), a: 0.0, a_d: 1.0 },
                TabularRule { t: None, history: HistoryPattern::Any, a: 1.0, a_d: 0.0 },
            ],
        };
        assert_eq!(p.apply(0.0, &OwnedHistory::with_exposures(&[1.0]), 0.0).unwrap(), 1.0);
        assert_eq!(p.apply(0.0, &OwnedHistory::with_exposures(&[0.0]), 0.0).unwrap(), 0.0);
        assert_eq!(p.apply(1.0, &OwnedHistory::with_exposures(&[0.0, 0.0]), 0.0).unwrap(), 0.0);
        assert_eq!(HistoryPattern::parse("0|*|2").unwrap(), HistoryPattern::Exact(vec![Some(0.0), None, Some(2.0)]));
    }

    #[test]
    fn randomizer_is_keyed() {
        let r = Randomizer::new(11, 5, 3);
        assert_eq!(r.get(4, 2).to_bits(), Randomizer::new(11, 9, 3).get(4, 2).to_bits());
        assert_eq!(r.get(4, 2).to_bits(), Randomizer::keyed(11, 4, 2).to_bits());
        assert_ne!(r.get(4, 2), r.get(4, 3));
    }
}
