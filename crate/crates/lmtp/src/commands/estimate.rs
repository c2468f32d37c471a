use std::path::{Path, PathBuf};

use anyhow::anyhow;
use lmtp_core::estimators::{estimate_curve, CurveEstimate, EstimateReport, EstimatorKind, Prepared};
use lmtp_core::nuisance::WeightSource;
use lmtp_core::policy::Policy;
use lmtp_core::postprocess::{contrast_curves, project_curve, CurveOptions};
use serde::Serialize;

use super::{create_dir, log_folds, require_valid};
use crate::config::RunConfig;
use crate::digest::config_digest;
use crate::error::{CliError, CliResult, Classify};
use crate::io::{read_dataset, write_curve, write_eif, write_json};

#[derive(Debug, Serialize)]
struct HorizonFailure {
    horizon: usize,
    error: String,
}

#[derive(Debug, Serialize)]
struct Report {
    config_digest: String,
    estimator: EstimatorKind,
    policy: String,
    reference: Option<String>,
    seed: u64,
    n: usize,
    tau: usize,
    /// Multiplier-bootstrap critical value of the simultaneous band.
    band_z_star: Option<f64>,
    estimates: Vec<EstimateReport>,
    failures: Vec<HorizonFailure>,
}

/// Paths of the files written by [`run`].
#[derive(Debug, Clone)]
pub struct Outputs {
    pub report: PathBuf,
    pub curve: PathBuf,
    pub eif: PathBuf,
    pub contrast: Option<PathBuf>,
}

/// Writes `report.json`, `curve.csv` and `eif.csv` (plus `contrast.csv`
/// when a reference policy is set) into the output directory. Horizons
/// that fail are listed in the report and make the command exit with 3
/// after the successful ones are written.
pub fn run(config: &RunConfig, config_dir: &Path) -> CliResult<Outputs> {
    config.validate().input()?;
    let input = config.input.as_ref().ok_or_else(|| CliError::input(anyhow!("no input dataset given")))?;
    let out = config.out.as_ref().ok_or_else(|| CliError::input(anyhow!("no output directory given")))?;
    let data = read_dataset(input, config.exposure.clone()).input()?;
    require_valid(&data)?;
    let horizons = config.horizons.resolve(data.tau()).input()?;
    let policy = config.policy.build(config_dir).input()?;
    policy.check_kind(data.exposure_kind()).input()?;
    let reference = match &config.reference {
        Some(spec) => {
            let p = spec.build(config_dir).input()?;
            p.check_kind(data.exposure_kind()).input()?;
            Some(p)
        }
        None => None,
    };
    let digest = config_digest(config, input).input()?;
    create_dir(out)?;
    log::info!("n={} tau={} horizons={horizons:?} policy={} digest={digest}", data.n(), data.tau(), policy.name());

    let core = config.estimator_config();
    let max_h = *horizons.last().expect("resolved horizons are non-empty");
    let fit = |p: &dyn Policy| -> CliResult<CurveEstimate> {
        let prepared = Prepared::new(&data, p, &core, WeightSource::Learned, max_h, config.seed).estimation()?;
        for d in prepared.weights.diagnostics() {
            log::info!("weights t={} at_risk={} max={:.4} mean={:.4}", d.t, d.at_risk, d.weight_max, d.weight_mean);
            log_folds("censoring", d.t, &d.censoring);
            log_folds("ratio", d.t, &d.ratio);
        }
        let curve = estimate_curve(&prepared, config.estimator, &horizons);
        for e in curve.estimates() {
            for fits in &e.report.outcome_fits {
                log_folds(&format!("outcome h={}", e.report.horizon), fits.t, &fits.folds);
            }
        }
        Ok(curve)
    };
    let curve = fit(policy.as_ref())?;
    let options = CurveOptions { level: config.band.level, multipliers: config.band.b, ..CurveOptions::incidence(config.seed) };

    let estimates = curve.estimates();
    let done: Vec<usize> = estimates.iter().map(|e| e.report.horizon).collect();
    let mut failures: Vec<HorizonFailure> = curve.failures().into_iter().map(|(horizon, e)| HorizonFailure { horizon, error: e.to_string() }).collect();
    for f in &failures {
        log::error!("horizon {} failed: {}", f.horizon, f.error);
    }

    let outputs = Outputs {
        report: out.join("report.json"),
        curve: out.join("curve.csv"),
        eif: out.join("eif.csv"),
        contrast: reference.as_ref().map(|_| out.join("contrast.csv")),
    };
    let mut z_star = None;
    if !estimates.is_empty() {
        let theta: Vec<f64> = estimates.iter().map(|e| e.report.theta).collect();
        let se: Vec<f64> = estimates.iter().map(|e| e.report.se).collect();
        let eif = curve.eif_matrix();
        let projected = project_curve(&done, &theta, &se, &eif, &options).estimation()?;
        z_star = Some(projected.z_star);
        write_curve(&projected, &outputs.curve).input()?;
        write_eif(&done, &eif, &outputs.eif).input()?;
    }

    if let (Some(reference), Some(path)) = (&reference, &outputs.contrast) {
        let base = fit(reference.as_ref())?;
        for (horizon, e) in base.failures() {
            log::error!("reference horizon {horizon} failed: {e}");
            if !failures.iter().any(|f| f.horizon == horizon) {
                failures.push(HorizonFailure { horizon, error: format!("reference: {e}") });
            }
        }
        let (a, b): (Vec<_>, Vec<_>) = estimates
            .iter()
            .filter_map(|x| base.estimates().into_iter().find(|y| y.report.horizon == x.report.horizon).map(|y| (*x, y)))
            .unzip();
        if !a.is_empty() {
            let c = contrast_curves(&a, &b).estimation()?;
            let options = CurveOptions { level: config.band.level, multipliers: config.band.b, ..CurveOptions::difference(config.seed) };
            let projected = project_curve(&c.horizons, &c.difference, &c.se, &c.eif, &options).estimation()?;
            write_curve(&projected, path).input()?;
        }
    }
    failures.sort_by_key(|f| f.horizon);

    let report = Report {
        config_digest: digest,
        estimator: config.estimator,
        policy: policy.name(),
        reference: reference.as_ref().map(|p| p.name()),
        seed: config.seed,
        n: data.n(),
        tau: data.tau(),
        band_z_star: z_star,
        estimates: estimates.iter().map(|e| e.report.clone()).collect(),
        failures,
    };
    write_json(&report, &outputs.report).input()?;
    if let Some(first) = report.failures.first() {
        return Err(CliError::estimation(anyhow!(
            "{} of {} horizon(s) failed; first at horizon {}: {}",
            report.failures.len(),
            horizons.len(),
            first.horizon,
            first.error
        )));
    }
    Ok(outputs)
}
