use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::ValueEnum;
use lmtp_core::oracle::{exhaustive_truth, monte_carlo_truth, simulate_observed, TruthReport};
use serde::Serialize;

use super::{create_dir, read_spec};
use crate::error::{CliError, CliResult, Classify};
use crate::io::{write_dataset, write_json};
use crate::policy_spec::PolicySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthEngine {
    /// Interventional Monte Carlo.
    Mc,
    /// Exact backward recursion; discrete specs only.
    Exact,
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub spec: PathBuf,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub policy: PolicySpec,
    pub truth: TruthEngine,
    /// Monte Carlo trajectories; defaults to `max(n, 100000)`.
    pub replicates: Option<usize>,
}

#[derive(Debug, Serialize)]
struct TruthFile {
    policy: String,
    seed: u64,
    truth: Vec<TruthReport>,
}

/// Writes `data.csv` and `truth.json` into `out`.
pub fn run(args: &SimulateArgs) -> CliResult<()> {
    if args.n == 0 {
        return Err(CliError::input(anyhow!("n must be positive")));
    }
    let spec = read_spec(&args.spec)?;
    let base = args.spec.parent().unwrap_or(Path::new("."));
    let policy = args.policy.build(base).input()?;
    policy.check_kind(&spec.exposure_kind()).input()?;
    let data = simulate_observed(&spec, args.n, args.seed).input()?;
    let truth = match args.truth {
        TruthEngine::Exact => (1..=spec.tau).map(|h| exhaustive_truth(&spec, policy.as_ref(), h)).collect::<Result<Vec<_>, _>>().input()?,
        TruthEngine::Mc => {
            let m = args.replicates.unwrap_or(args.n.max(100_000));
            monte_carlo_truth(&spec, policy.as_ref(), m, args.seed).input()?
        }
    };
    create_dir(&args.out)?;
    write_dataset(&data, &args.out.join("data.csv")).input()?;
    write_json(&TruthFile { policy: policy.name(), seed: args.seed, truth }, &args.out.join("truth.json")).input()?;
    log::info!("wrote {} units to {}", args.n, args.out.display());
    Ok(())
}
