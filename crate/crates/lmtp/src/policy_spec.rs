//! Policy selection from configuration: a JSON object tagged by `kind`,
//! or the compact command-line form `kind[:arg[:arg]]`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use lmtp_core::policy::{
    AdditiveShift, Bound, DelayIntubation, GracePeriod, HistoryPattern, Identity, IpsiRiskRatio, MultiplicativeShift, Policy,
    Static, Tabular, TabularRule,
};
use serde::{Deserialize, Serialize};

/// Bound of a shift: a number, or a column of the baseline or current
/// covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundSpec {
    Constant(f64),
    Column(ColumnBound),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnBound {
    Baseline(usize),
    Covariate(usize),
}

impl BoundSpec {
    fn build(spec: &Option<BoundSpec>) -> Bound {
        match spec {
            None => Bound::Unbounded,
            Some(BoundSpec::Constant(v)) => Bound::Constant(*v),
            Some(BoundSpec::Column(ColumnBound::Baseline(j))) => Bound::Baseline(*j),
            Some(BoundSpec::Column(ColumnBound::Covariate(j))) => Bound::Covariate(*j),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Identity,
    Static {
        value: f64,
    },
    Additive {
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<BoundSpec>,
    },
    Multiplicative {
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<BoundSpec>,
    },
    IpsiRr {
        delta: f64,
    },
    Grace {
        m: usize,
        column: usize,
    },
    DelayIntubation,
    /// CSV with columns `t,history,a,a_d`; an empty `t` applies at every
    /// time, `history` is `*` or `|`-separated past exposures.
    Custom {
        table: PathBuf,
    },
}

impl PolicySpec {
    /// Parses `identity`, `static:1`, `additive:1[:upper]`,
    /// `multiplicative:0.5[:lower]`, `ipsi_rr:0.5`, `grace:m:column`,
    /// `delay_intubation`, `custom:path`, or a JSON object.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).context("invalid policy JSON");
        }
        let parts: Vec<&str> = s.split(':').collect();
        let num = |k: usize| -> Result<f64> {
            parts.get(k).ok_or_else(|| anyhow!("policy `{s}` needs argument {k}"))?.parse().with_context(|| format!("policy `{s}`"))
        };
        let int = |k: usize| -> Result<usize> {
            parts.get(k).ok_or_else(|| anyhow!("policy `{s}` needs argument {k}"))?.parse().with_context(|| format!("policy `{s}`"))
        };
        let optional = |k: usize| -> Result<Option<BoundSpec>> { parts.get(k).map(|_| num(k).map(BoundSpec::Constant)).transpose() };
        Ok(match parts[0] {
            "identity" => PolicySpec::Identity,
            "static" => PolicySpec::Static { value: num(1)? },
            "additive" => PolicySpec::Additive { delta: num(1)?, upper: optional(2)? },
            "multiplicative" => PolicySpec::Multiplicative { delta: num(1)?, lower: optional(2)? },
            "ipsi_rr" => PolicySpec::IpsiRr { delta: num(1)? },
            "grace" => PolicySpec::Grace { m: int(1)?, column: int(2)? },
            "delay_intubation" => PolicySpec::DelayIntubation,
            "custom" => PolicySpec::Custom {
                table: PathBuf::from(s.strip_prefix("custom:").ok_or_else(|| anyhow!("custom policy needs a table path"))?),
            },
            other => bail!("unknown policy kind `{other}`"),
        })
    }

    /// Relative table paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Arc<dyn Policy>> {
        Ok(match self {
            PolicySpec::Identity => Arc::new(Identity),
            PolicySpec::Static { value } => Arc::new(Static { value: *value }),
            PolicySpec::Additive { delta, upper } => Arc::new(AdditiveShift::new(*delta, BoundSpec::build(upper))?),
            PolicySpec::Multiplicative { delta, lower } => Arc::new(MultiplicativeShift::new(*delta, BoundSpec::build(lower))?),
            PolicySpec::IpsiRr { delta } => Arc::new(IpsiRiskRatio::new(*delta)?),
            PolicySpec::Grace { m, column } => Arc::new(GracePeriod { m: *m, column: *column }),
            PolicySpec::DelayIntubation => Arc::new(DelayIntubation),
            PolicySpec::Custom { table } => Arc::new(read_tabular(&base.join(table))?),
        })
    }
}

pub fn read_tabular(path: &Path) -> Result<Tabular> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open policy table `{}`", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("policy table lacks column `{name}`"));
    let (ct, ch, ca, cd) = (col("t")?, col("history")?, col("a")?, col("a_d")?);
    let mut rules = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let line = k + 2;
        let t = match field(ct) {
            "" => None,
            v => Some(v.parse::<usize>().with_context(|| format!("policy table line {line}: bad t"))?),
        };
        rules.push(TabularRule {
            t,
            history: HistoryPattern::parse(field(ch)).with_context(|| format!("policy table line {line}"))?,
            a: field(ca).parse().with_context(|| format!("policy table line {line}: bad a"))?,
            a_d: field(cd).parse().with_context(|| format!("policy table line {line}: bad a_d"))?,
        });
    }
    Ok(Tabular { rules })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_and_json_forms_agree() {
        assert_eq!(PolicySpec::parse("static:1").unwrap(), PolicySpec::Static { value: 1.0 });
        assert_eq!(PolicySpec::parse(r#"{"kind":"ipsi_rr","delta":0.5}"#).unwrap(), PolicySpec::parse("ipsi_rr:0.5").unwrap());
        assert_eq!(
            PolicySpec::parse("additive:1:4").unwrap(),
            PolicySpec::Additive { delta: 1.0, upper: Some(BoundSpec::Constant(4.0)) }
        );
        let json: PolicySpec = serde_json::from_str(r#"{"kind":"multiplicative","delta":0.5,"lower":{"covariate":0}}"#).unwrap();
        assert_eq!(json, PolicySpec::Multiplicative { delta: 0.5, lower: Some(BoundSpec::Column(ColumnBound::Covariate(0))) });
        assert!(PolicySpec::parse("teleport").is_err());
        assert!(PolicySpec::parse("ipsi_rr:1.5").unwrap().build(Path::new(".")).is_err());
    }

    #[test]
    fn tabular_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("p.csv"), "t,history,a,a_d\n,*,2,1\n1,,0,1\n").unwrap();
        let p = PolicySpec::parse("custom:p.csv").unwrap().build(dir.path()).unwrap();
        assert_eq!(p.name(), "custom(2 rules)");
        let table = read_tabular(&dir.path().join("p.csv")).unwrap();
        assert_eq!(table.rules[0].t, None);
        assert_eq!(table.rules[1].history, HistoryPattern::Exact(vec![]));
    }
}
