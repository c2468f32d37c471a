//! Longitudinal competing-risks panel, its validity rules, risk-set
//! indicators and history design rows.
//!
//! Within a time step the variables follow the order
//! `D_t, Y_t, L_t, A_t, C_t`; the outcome `Y_{tau+1}` closes the record.
//! `C_t = 1` means the unit is still on study at `t + 1`. Cells that are
//! undefined (after censoring, or covariates and exposure after an event)
//! must be exactly zero.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Range, RangeInclusive};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ExposureKind {
    /// Integer-coded levels `0..levels`.
    Discrete { levels: usize },
    Continuous,
}

impl ExposureKind {
    pub fn support(&self) -> Option<Vec<f64>> {
        match self {
            ExposureKind::Discrete { levels } => Some((0..*levels).map(|k| k as f64).collect()),
            ExposureKind::Continuous => None,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        match self {
            ExposureKind::Discrete { levels } => {
                libm::trunc(value) == value && value >= 0.0 && value < *levels as f64
            }
            ExposureKind::Continuous => value.is_finite(),
        }
    }
}

/// How much of the past enters the regression design at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MarkovLag {
    #[default]
    Unbounded,
    /// Keep the `r` most recent covariate blocks and the `r` most recent
    /// exposure blocks. Baseline covariates are always kept.
    Lag(usize),
}

impl MarkovLag {
    pub fn covariate_times(self, t: usize) -> RangeInclusive<usize> {
        match self {
            MarkovLag::Unbounded => 1..=t,
            MarkovLag::Lag(r) => (t + 1).saturating_sub(r).max(1)..=t,
        }
    }

    pub fn exposure_times(self, t: usize) -> Range<usize> {
        match self {
            MarkovLag::Unbounded => 1..t,
            MarkovLag::Lag(r) => t.saturating_sub(r).max(1)..t,
        }
    }
}

/// Read access to a history `h_t = (baseline, L_1..L_t, A_1..A_{t-1})`.
///
/// Indices outside the defined range return an empty slice (the null set).
pub trait History {
    fn time(&self) -> usize;
    fn baseline(&self) -> &[f64];
    fn covariates(&self, s: usize) -> &[f64];
    fn exposure(&self, s: usize) -> &[f64];
}

/// Unvalidated components of a dataset. Per-time vectors hold `tau`
/// entries, entry `k` describing time `k + 1`.
#[derive(Debug, Clone)]
pub struct DatasetParts {
    pub baseline: Matrix,
    pub covariates: Vec<Matrix>,
    pub exposure: Vec<Matrix>,
    pub censoring: Vec<Vec<u8>>,
    pub competing: Vec<Vec<u8>>,
    pub outcome: Vec<Vec<u8>>,
    pub final_outcome: Vec<u8>,
    pub exposure_kind: ExposureKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalDataset {
    n: usize,
    tau: usize,
    baseline: Matrix,
    covariates: Vec<Matrix>,
    exposure: Vec<Matrix>,
    censoring: Vec<Vec<u8>>,
    competing: Vec<Vec<u8>>,
    outcome: Vec<Vec<u8>>,
    final_outcome: Vec<u8>,
    exposure_kind: ExposureKind,
}

impl LongitudinalDataset {
    /// Checks the rectangular structure. Invariant violations are not
    /// checked here; see [`LongitudinalDataset::validate`].
    pub fn new(parts: DatasetParts) -> Result<Self> {
        let DatasetParts {
            baseline,
            covariates,
            exposure,
            censoring,
            competing,
            outcome,
            final_outcome,
            exposure_kind,
        } = parts;
        let n = final_outcome.len();
        let tau = exposure.len();
        if tau == 0 {
            return Err(Error::Structure("at least one time point is required".into()));
        }
        if baseline.rows() != n {
            return Err(Error::Structure(format!(
                "baseline has {} rows, expected {n}",
                baseline.rows()
            )));
        }
        for (name, len) in [
            ("covariate", covariates.len()),
            ("censoring", censoring.len()),
            ("competing", competing.len()),
            ("outcome", outcome.len()),
        ] {
            if len != tau {
                return Err(Error::Structure(format!(
                    "{name} blocks: {len} time points, expected {tau}"
                )));
            }
        }
        let q = exposure[0].cols();
        if q == 0 {
            return Err(Error::Structure("exposure must have at least one column".into()));
        }
        for k in 0..tau {
            let t = k + 1;
            if covariates[k].rows() != n || exposure[k].rows() != n {
                return Err(Error::Structure(format!("ragged block at t={t}")));
            }
            if exposure[k].cols() != q {
                return Err(Error::Structure(format!(
                    "exposure width {} at t={t}, expected {q}",
                    exposure[k].cols()
                )));
            }
            for (name, v) in [("C", &censoring[k]), ("D", &competing[k]), ("Y", &outcome[k])] {
                if v.len() != n {
                    return Err(Error::Structure(format!("{name}{t} has {} rows, expected {n}", v.len())));
                }
                if let Some(i) = v.iter().position(|&x| x > 1) {
                    return Err(Error::Structure(format!("non-binary value in {name}{t} at unit {i}")));
                }
            }
        }
        if let Some(i) = final_outcome.iter().position(|&x| x > 1) {
            return Err(Error::Structure(format!("non-binary value in Y{} at unit {i}", tau + 1)));
        }
        if let ExposureKind::Discrete { levels } = exposure_kind {
            if levels < 1 {
                return Err(Error::Structure("discrete exposure needs at least one level".into()));
            }
        }
        Ok(Self {
            n,
            tau,
            baseline,
            covariates,
            exposure,
            censoring,
            competing,
            outcome,
            final_outcome,
            exposure_kind,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn exposure_kind(&self) -> &ExposureKind {
        &self.exposure_kind
    }

    pub fn exposure_width(&self) -> usize {
        self.exposure[0].cols()
    }

    pub fn baseline(&self) -> &Matrix {
        &self.baseline
    }

    pub fn covariates(&self, t: usize) -> &Matrix {
        &self.covariates[t - 1]
    }

    pub fn exposure(&self, t: usize) -> &Matrix {
        &self.exposure[t - 1]
    }

    /// `C_t`; `C_0` is one for every unit.
    pub fn censoring_at(&self, unit: usize, t: usize) -> u8 {
        if t == 0 {
            1
        } else {
            self.censoring[t - 1][unit]
        }
    }

    pub fn censoring(&self, t: usize) -> &[u8] {
        &self.censoring[t - 1]
    }

    pub fn competing(&self, t: usize) -> &[u8] {
        &self.competing[t - 1]
    }

    /// `Y_t` for `t` in `1..=tau + 1`.
    pub fn outcome(&self, t: usize) -> &[u8] {
        if t == self.tau + 1 {
            &self.final_outcome
        } else {
            &self.outcome[t - 1]
        }
    }

    pub fn final_outcome(&self) -> &[u8] {
        &self.final_outcome
    }

    pub fn into_parts(self) -> DatasetParts {
        DatasetParts {
            baseline: self.baseline,
            covariates: self.covariates,
            exposure: self.exposure,
            censoring: self.censoring,
            competing: self.competing,
            outcome: self.outcome,
            final_outcome: self.final_outcome,
            exposure_kind: self.exposure_kind,
        }
    }

    /// `R_t = 1{D_t = 0, Y_t = 0}` for `t` in `1..=tau`, and one at
    /// `tau + 1`.
    pub fn risk(&self, unit: usize, t: usize) -> u8 {
        if t == self.tau + 1 {
            1
        } else {
            u8::from(self.competing[t - 1][unit] == 0 && self.outcome[t - 1][unit] == 0)
        }
    }

    /// On study and event-free at the start of `t`: `C_{t-1} = R_t = 1`.
    pub fn at_risk(&self, unit: usize, t: usize) -> bool {
        self.censoring_at(unit, t - 1) == 1 && self.risk(unit, t) == 1
    }

    /// Rows entering the sequential regression at `t`: `C_t = R_t = 1`.
    pub fn in_regression(&self, unit: usize, t: usize) -> bool {
        self.censoring[t - 1][unit] == 1 && self.risk(unit, t) == 1
    }

    pub fn risk_indicators(&self) -> RiskIndicators {
        let r = (1..=self.tau + 1)
            .map(|t| (0..self.n).map(|i| self.risk(i, t)).collect())
            .collect();
        RiskIndicators { r }
    }

    pub fn unit_history(&self, unit: usize, t: usize) -> UnitHistory<'_> {
        UnitHistory { data: self, unit, t }
    }

    /// Exhaustive invariant check. Returns every violation found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut push = |unit, t, kind| violations.push(Violation { unit, t, kind });
        for i in 0..self.n {
            if self.baseline.row(i).iter().any(|v| !v.is_finite()) {
                push(i, 0, ViolationKind::Missing(Field::Covariate));
            }
            if self.competing[0][i] != 0 || self.outcome[0][i] != 0 {
                push(i, 1, ViolationKind::EventAtStart);
            }
            for t in 1..=self.tau {
                let k = t - 1;
                let a = self.exposure[k].row(i);
                let l = self.covariates[k].row(i);
                if a.iter().any(|v| !v.is_finite()) {
                    push(i, t, ViolationKind::Missing(Field::Exposure));
                }
                if l.iter().any(|v| !v.is_finite()) {
                    push(i, t, ViolationKind::Missing(Field::Covariate));
                }
                let (c, d, y) = (self.censoring[k][i], self.competing[k][i], self.outcome[k][i]);
                if self.censoring_at(i, t - 1) == 0 {
                    if c != 0 {
                        push(i, t, ViolationKind::CensoringNotMonotone);
                    }
                    if d != 0 {
                        push(i, t, ViolationKind::NonNullAfterCensoring(Field::Competing));
                    }
                    if y != 0 {
                        push(i, t, ViolationKind::NonNullAfterCensoring(Field::Outcome));
                    }
                    if a.iter().any(|&v| v != 0.0) {
                        push(i, t, ViolationKind::NonNullAfterCensoring(Field::Exposure));
                    }
                    if l.iter().any(|&v| v != 0.0) {
                        push(i, t, ViolationKind::NonNullAfterCensoring(Field::Covariate));
                    }
                    continue;
                }
                if t >= 2 {
                    let (d_prev, y_prev) = (self.competing[k - 1][i], self.outcome[k - 1][i]);
                    if y_prev == 1 && y == 0 {
                        push(i, t, ViolationKind::AbsorbingOutcome);
                    }
                    if d_prev == 1 && d == 0 {
                        push(i, t, ViolationKind::AbsorbingCompeting);
                    }
                    if d == 1 && y_prev == 0 && y == 1 {
                        push(i, t, ViolationKind::CompetingPrecludesOutcome);
                    }
                }
                if d == 1 || y == 1 {
                    if a.iter().any(|&v| v != 0.0) {
                        push(i, t, ViolationKind::NonNullAfterEvent(Field::Exposure));
                    }
                    if l.iter().any(|&v| v != 0.0) {
                        push(i, t, ViolationKind::NonNullAfterEvent(Field::Covariate));
                    }
                } else if a.iter().any(|&v| v.is_finite() && !self.exposure_kind.contains(v)) {
                    push(i, t, ViolationKind::ExposureOutOfSupport);
                }
            }
            let t = self.tau + 1;
            let y_final = self.final_outcome[i];
            if self.censoring[self.tau - 1][i] == 0 {
                if y_final != 0 {
                    push(i, t, ViolationKind::NonNullAfterCensoring(Field::Outcome));
                }
            } else {
                let (d, y) = (self.competing[self.tau - 1][i], self.outcome[self.tau - 1][i]);
                if y == 1 && y_final == 0 {
                    push(i, t, ViolationKind::AbsorbingOutcome);
                }
                if d == 1 && y == 0 && y_final == 1 {
                    push(i, t, ViolationKind::CompetingPrecludesOutcome);
                }
            }
        }
        ValidationReport { violations }
    }

    /// Design row for `(unit, t)` under `lag`.
    pub fn history(&self, unit: usize, t: usize, lag: MarkovLag) -> Result<HistoryView> {
        if t == 0 || t > self.tau {
            return Err(Error::TimeOutOfRange { t, tau: self.tau });
        }
        if unit >= self.n {
            return Err(Error::InvalidArgument(format!("unit {unit} out of range")));
        }
        let mut row = Vec::with_capacity(self.history_width(t, lag));
        self.write_history(unit, t, lag, &mut row);
        Ok(HistoryView { unit, t, lag, row })
    }

    pub fn history_width(&self, t: usize, lag: MarkovLag) -> usize {
        let l: usize = lag.covariate_times(t).map(|s| self.covariates[s - 1].cols()).sum();
        let a = lag.exposure_times(t).len() * self.exposure_width();
        self.baseline.cols() + l + a
    }

    fn write_history(&self, unit: usize, t: usize, lag: MarkovLag, out: &mut Vec<f64>) {
        out.extend_from_slice(self.baseline.row(unit));
        for s in lag.covariate_times(t) {
            out.extend_from_slice(self.covariates[s - 1].row(unit));
        }
        for s in lag.exposure_times(t) {
            out.extend_from_slice(self.exposure[s - 1].row(unit));
        }
    }

    /// Column names of the history design at `t`, in design order.
    pub fn history_labels(&self, t: usize, lag: MarkovLag) -> Vec<String> {
        let mut labels: Vec<String> = (0..self.baseline.cols()).map(|j| format!("L0_{j}")).collect();
        for s in lag.covariate_times(t) {
            labels.extend((0..self.covariates[s - 1].cols()).map(|j| format!("L{s}_{j}")));
        }
        let q = self.exposure_width();
        for s in lag.exposure_times(t) {
            if q == 1 {
                labels.push(format!("A{s}"));
            } else {
                labels.extend((0..q).map(|j| format!("A{s}_{j}")));
            }
        }
        labels
    }

    /// Regression design `[exposure | history]` for all units at `t`.
    /// `exposure` must be `n x q`; pass the observed block or an
    /// intervened one.
    pub fn design(&self, t: usize, lag: MarkovLag, exposure: &Matrix) -> Matrix {
        let width = exposure.cols() + self.history_width(t, lag);
        let mut data = Vec::with_capacity(self.n * width);
        for i in 0..self.n {
            data.extend_from_slice(exposure.row(i));
            self.write_history(i, t, lag, &mut data);
        }
        Matrix::from_vec(self.n, width, data)
    }
}

/// `R_t` for `t = 1..=tau + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskIndicators {
    r: Vec<Vec<u8>>,
}

impl RiskIndicators {
    pub fn get(&self, unit: usize, t: usize) -> u8 {
        self.r[t - 1][unit]
    }

    pub fn column(&self, t: usize) -> &[u8] {
        &self.r[t - 1]
    }

    /// Number of time points covered, `tau + 1`.
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryView {
    pub unit: usize,
    pub t: usize,
    pub lag: MarkovLag,
    pub row: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct UnitHistory<'a> {
    data: &'a LongitudinalDataset,
    unit: usize,
    t: usize,
}

impl History for UnitHistory<'_> {
    fn time(&self) -> usize {
        self.t
    }

    fn baseline(&self) -> &[f64] {
        self.data.baseline.row(self.unit)
    }

    fn covariates(&self, s: usize) -> &[f64] {
        if s == 0 || s > self.t {
            &[]
        } else {
            self.data.covariates[s - 1].row(self.unit)
        }
    }

    fn exposure(&self, s: usize) -> &[f64] {
        if s == 0 || s >= self.t {
            &[]
        } else {
            self.data.exposure[s - 1].row(self.unit)
        }
    }
}

/// A history held by value, handy for tests and for policies evaluated
/// outside a dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OwnedHistory {
    pub t: usize,
    pub baseline: Vec<f64>,
    /// `L_1..L_t`.
    pub covariates: Vec<Vec<f64>>,
    /// `A_1..A_{t-1}`.
    pub exposures: Vec<Vec<f64>>,
}

impl OwnedHistory {
    pub fn empty(t: usize) -> Self {
        Self {
            t,
            baseline: Vec::new(),
            covariates: vec![Vec::new(); t],
            exposures: vec![Vec::new(); t.saturating_sub(1)],
        }
    }

    /// Scalar exposure history `A_1..A_{t-1}` and no covariates.
    pub fn with_exposures(exposures: &[f64]) -> Self {
        let t = exposures.len() + 1;
        Self {
            t,
            baseline: Vec::new(),
            covariates: vec![Vec::new(); t],
            exposures: exposures.iter().map(|&a| vec![a]).collect(),
        }
    }

    pub fn copy_from(h: &dyn History) -> Self {
        let t = h.time();
        Self {
            t,
            baseline: h.baseline().to_vec(),
            covariates: (1..=t).map(|s| h.covariates(s).to_vec()).collect(),
            exposures: (1..t).map(|s| h.exposure(s).to_vec()).collect(),
        }
    }
}

impl History for OwnedHistory {
    fn time(&self) -> usize {
        self.t
    }

    fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    fn covariates(&self, s: usize) -> &[f64] {
        if s == 0 {
            return &[];
        }
        self.covariates.get(s - 1).map_or(&[], |v| v.as_slice())
    }

    fn exposure(&self, s: usize) -> &[f64] {
        if s == 0 || s >= self.t {
            return &[];
        }
        self.exposures.get(s - 1).map_or(&[], |v| v.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Covariate,
    Exposure,
    Censoring,
    Competing,
    Outcome,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Covariate => "L",
            Field::Exposure => "A",
            Field::Censoring => "C",
            Field::Competing => "D",
            Field::Outcome => "Y",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    EventAtStart,
    CensoringNotMonotone,
    NonNullAfterCensoring(Field),
    NonNullAfterEvent(Field),
    AbsorbingOutcome,
    AbsorbingCompeting,
    CompetingPrecludesOutcome,
    ExposureOutOfSupport,
    Missing(Field),
}

/// One broken invariant. `unit` is the 0-based row; `t` is the time index
/// (0 for baseline cells).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub unit: usize,
    pub t: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unit {}: ", self.unit)?;
        let t = self.t;
        match self.kind {
            ViolationKind::EventAtStart => write!(f, "event indicator set at t={t}"),
            ViolationKind::CensoringNotMonotone => write!(f, "censoring not monotone at t={t}"),
            ViolationKind::NonNullAfterCensoring(x) => {
                write!(f, "non-null value after censoring ({x}) at t={t}")
            }
            ViolationKind::NonNullAfterEvent(x) => write!(f, "non-null value after event ({x}) at t={t}"),
            ViolationKind::AbsorbingOutcome => write!(f, "absorbing outcome broken at t={t}"),
            ViolationKind::AbsorbingCompeting => write!(f, "absorbing competing event broken at t={t}"),
            ViolationKind::CompetingPrecludesOutcome => {
                write!(f, "outcome after competing event at t={t}")
            }
            ViolationKind::ExposureOutOfSupport => write!(f, "exposure outside declared support at t={t}"),
            ViolationKind::Missing(x) => write!(f, "missing value ({x}) at t={t}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidData(self.violations.len()))
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::string::ToString;

    /// Scalar-exposure panel from per-time columns; `l` gives one
    /// covariate per time.
    pub(crate) struct Panel {
        pub l: Vec<Vec<f64>>,
        pub a: Vec<Vec<f64>>,
        pub c: Vec<Vec<u8>>,
        pub d: Vec<Vec<u8>>,
        pub y: Vec<Vec<u8>>,
        pub y_final: Vec<u8>,
    }

    impl Panel {
        pub(crate) fn build(self, kind: ExposureKind) -> LongitudinalDataset {
            let n = self.y_final.len();
            LongitudinalDataset::new(DatasetParts {
                baseline: Matrix::zeros(n, 0),
                covariates: self.l.iter().map(|v| Matrix::column(v)).collect(),
                exposure: self.a.iter().map(|v| Matrix::column(v)).collect(),
                censoring: self.c,
                competing: self.d,
                outcome: self.y,
                final_outcome: self.y_final,
                exposure_kind: kind,
            })
            .unwrap()
        }
    }

    fn valid_three_units() -> Panel {
        // unit 0: event of interest at t=2; unit 1: censored after t=1;
        // unit 2: event-free throughout.
        Panel {
            l: vec![vec![0.3, 1.2, -0.5], vec![0.0, 0.0, 0.7]],
            a: vec![vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]],
            c: vec![vec![1, 0, 1], vec![1, 0, 1]],
            d: vec![vec![0, 0, 0], vec![0, 0, 0]],
            y: vec![vec![0, 0, 0], vec![1, 0, 0]],
            y_final: vec![1, 0, 0],
        }
    }

    #[test]
    fn valid_panel_has_no_violations() {
        let data = valid_three_units().build(ExposureKind::Discrete { levels: 2 });
        let report = data.validate();
        assert!(report.is_ok(), "{:?}", report.violations);
    }

    #[test]
    fn absorbing_outcome_violation_is_reported_with_time() {
        let mut p = valid_three_units();
        p.a = vec![vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]];
        p.l.push(vec![0.0, 0.0, 0.0]);
        p.c = vec![vec![1, 0, 1], vec![1, 0, 1], vec![1, 0, 1]];
        p.d = vec![vec![0, 0, 0]; 3];
        // unit 0: Y2 = 1, Y3 = 0
        p.y = vec![vec![0, 0, 0], vec![1, 0, 0], vec![0, 0, 0]];
        p.y_final = vec![0, 0, 0];
        let data = p.build(ExposureKind::Discrete { levels: 2 });
        let report = data.validate();
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        assert!(msgs.iter().any(|m| m.contains("absorbing outcome broken at t=3")), "{msgs:?}");
        assert!(report.violations.iter().all(|v| v.unit == 0));
    }

    #[test]
    fn exposure_after_censoring_is_reported() {
        let mut p = valid_three_units();
        p.a.push(vec![0.0, 1.0, 0.0]);
        p.l.push(vec![0.0, 0.0, 0.0]);
        p.c = vec![vec![1, 1, 1], vec![1, 0, 1], vec![1, 0, 1]];
        p.d.push(vec![0, 0, 0]);
        p.y = vec![vec![0, 0, 0], vec![1, 0, 0], vec![1, 0, 0]];
        let data = p.build(ExposureKind::Discrete { levels: 2 });
        let report = data.validate();
        assert_eq!(report.violations.len(), 1, "{:?}", report.violations);
        let v = report.violations[0];
        assert_eq!((v.unit, v.t), (1, 3));
        assert!(v.to_string().contains("non-null value after censoring"));
    }

    #[test]
    fn violations_are_exhaustive() {
        let mut p = valid_three_units();
        p.d[0] = vec![1, 1, 0];
        p.y_final = vec![1, 1, 0];
        let data = p.build(ExposureKind::Discrete { levels: 2 });
        let report = data.validate();
        // two units start with an event; unit 1 also has an outcome after censoring
        assert!(report.violations.iter().filter(|v| v.kind == ViolationKind::EventAtStart).count() == 2);
        assert!(report
            .violations
            .iter()
            .any(|v| v.unit == 1 && v.kind == ViolationKind::NonNullAfterCensoring(Field::Outcome)));
    }

    #[test]
    fn structural_errors_are_distinct() {
        let mut p = valid_three_units();
        p.c[0] = vec![1, 2, 1];
        let n = p.y_final.len();
        let err = LongitudinalDataset::new(DatasetParts {
            baseline: Matrix::zeros(n, 0),
            covariates: p.l.iter().map(|v| Matrix::column(v)).collect(),
            exposure: p.a.iter().map(|v| Matrix::column(v)).collect(),
            censoring: p.c,
            competing: p.d,
            outcome: p.y,
            final_outcome: p.y_final,
            exposure_kind: ExposureKind::Continuous,
        })
        .unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn risk_indicators_follow_definition() {
        let p = Panel {
            l: vec![vec![0.0]; 3],
            a: vec![vec![0.0]; 3],
            c: vec![vec![1]; 3],
            d: vec![vec![0], vec![0], vec![1]],
            y: vec![vec![0]; 3],
            y_final: vec![0],
        };
        let data = p.build(ExposureKind::Discrete { levels: 2 });
        assert!(data.validate().is_ok());
        let r = data.risk_indicators();
        assert_eq!(r.len(), 4);
        let col: Vec<u8> = (1..=4).map(|t| r.get(0, t)).collect();
        assert_eq!(col, vec![1, 1, 0, 1]);
    }

    fn three_period_panel() -> LongitudinalDataset {
        let n = 2;
        LongitudinalDataset::new(DatasetParts {
            baseline: Matrix::from_rows(&[vec![10.0], vec![20.0]]).unwrap(),
            covariates: (1..=3)
                .map(|t| Matrix::from_rows(&[vec![t as f64, -(t as f64)], vec![0.5 * t as f64, 1.0]]).unwrap())
                .collect(),
            exposure: (1..=3).map(|t| Matrix::column(&[t as f64 * 100.0, 7.0])).collect(),
            censoring: vec![vec![1; n]; 3],
            competing: vec![vec![0; n]; 3],
            outcome: vec![vec![0; n]; 3],
            final_outcome: vec![0; n],
            exposure_kind: ExposureKind::Continuous,
        })
        .unwrap()
    }

    #[test]
    fn history_at_first_time_has_no_past() {
        let data = three_period_panel();
        for lag in [MarkovLag::Unbounded, MarkovLag::Lag(1), MarkovLag::Lag(2)] {
            let h = data.history(0, 1, lag).unwrap();
            assert_eq!(h.row, vec![10.0, 1.0, -1.0]);
        }
    }

    #[test]
    fn history_unbounded_and_lagged_layouts() {
        let data = three_period_panel();
        let full = data.history(0, 3, MarkovLag::Unbounded).unwrap();
        assert_eq!(full.row, vec![10.0, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 100.0, 200.0]);
        assert_eq!(
            data.history_labels(3, MarkovLag::Unbounded),
            vec!["L0_0", "L1_0", "L1_1", "L2_0", "L2_1", "L3_0", "L3_1", "A1", "A2"]
        );
        let lagged = data.history(0, 3, MarkovLag::Lag(2)).unwrap();
        assert_eq!(data.history_labels(3, MarkovLag::Lag(2)), vec!["L0_0", "L2_0", "L2_1", "L3_0", "L3_1", "A1", "A2"]);
        // the lagged row is the unbounded row with the L1 block removed
        let mut expected = full.row.clone();
        expected.drain(1..3);
        assert_eq!(lagged.row, expected);
        assert!(matches!(data.history(0, 4, MarkovLag::Unbounded), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(data.history(0, 0, MarkovLag::Unbounded), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn design_prepends_exposure() {
        let data = three_period_panel();
        let x = data.design(2, MarkovLag::Lag(1), data.exposure(2));
        assert_eq!(x.row(1), &[7.0, 20.0, 1.0, 1.0, 7.0]);
    }
}
