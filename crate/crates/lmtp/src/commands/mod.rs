pub mod benchmark;
pub mod estimate;
pub mod simulate;
pub mod validate;

use std::path::Path;

use anyhow::Context;
use lmtp_core::data::LongitudinalDataset;
use lmtp_core::nuisance::FoldDiagnostics;
use lmtp_core::oracle::DgpSpec;

use crate::error::{CliError, CliResult, Classify};

/// Logs each violation on stderr and fails with exit code 2 if any exist.
pub(crate) fn require_valid(data: &LongitudinalDataset) -> CliResult<()> {
    let report = data.validate();
    for v in &report.violations {
        log::error!("{v}");
    }
    if report.is_ok() {
        Ok(())
    } else {
        let listed: Vec<String> = report.violations.iter().take(10).map(ToString::to_string).collect();
        let more = report.violations.len().saturating_sub(listed.len());
        let tail = if more > 0 { format!("; and {more} more") } else { String::new() };
        Err(CliError::input(anyhow::anyhow!(
            "dataset has {} violation(s): {}{tail}",
            report.violations.len(),
            listed.join("; ")
        )))
    }
}

pub(crate) fn read_spec(path: &Path) -> CliResult<DgpSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read spec `{}`", path.display())).input()?;
    let spec: DgpSpec = serde_json::from_str(&text).with_context(|| format!("invalid spec `{}`", path.display())).input()?;
    spec.validate().input()?;
    Ok(spec)
}

pub(crate) fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).with_context(|| format!("cannot create `{}`", path.display())).input()
}

pub(crate) fn log_folds(what: &str, t: usize, folds: &[FoldDiagnostics]) {
    for f in folds {
        let risks: Vec<String> = f
            .risks
            .iter()
            .map(|r| match (&r.risk, &r.error) {
                (Some(v), _) => format!("{}={v:.6}", r.name),
                (None, Some(e)) => format!("{}=failed({e})", r.name),
                (None, None) => r.name.clone(),
            })
            .collect();
        log::info!("{what} t={t} fold={} chosen={} risks=[{}]", f.fold, f.chosen, risks.join(", "));
    }
}
