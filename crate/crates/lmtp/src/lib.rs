//! Command-line front end for `lmtp-core`: CSV datasets, JSON
//! configurations and the `estimate`, `simulate`, `benchmark` and
//! `validate` subcommands.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 when
//! estimation fails.

pub mod commands;
pub mod config;
pub mod digest;
pub mod error;
pub mod io;
pub mod policy_spec;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lmtp_core::estimators::EstimatorKind;

use crate::commands::benchmark::BenchmarkConfig;
use crate::commands::simulate::{SimulateArgs, TruthEngine};
use crate::config::{Horizons, RunConfig};
use crate::error::{CliError, CliResult, Classify};
use crate::policy_spec::PolicySpec;

#[derive(Debug, Parser)]
#[command(name = "lmtp", version, about = "Cumulative incidence under longitudinal modified treatment policies")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism. Results do
    /// not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the incidence curve under a policy.
    Estimate(EstimateFlags),
    /// Draw a dataset from a simulation spec and compute its truth.
    Simulate(SimulateFlags),
    /// Replicated estimation on simulated data against the exact truth.
    Benchmark(BenchmarkFlags),
    /// Check a dataset against the structural invariants.
    Validate(ValidateFlags),
}

#[derive(Debug, Args)]
pub struct EstimateFlags {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<EstimatorKind>,
    /// `kind[:args]` or a JSON object, e.g. `static:1`, `ipsi_rr:0.5`.
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<PolicySpec>,
    /// Reference policy; adds a contrast curve (policy minus reference).
    #[arg(long, value_parser = parse_policy)]
    pub reference: Option<PolicySpec>,
    /// `all` or a comma-separated list.
    #[arg(long, value_parser = parse_horizons)]
    pub horizons: Option<Horizons>,
}

#[derive(Debug, Args)]
pub struct SimulateFlags {
    /// Simulation spec (JSON).
    #[arg(long, alias = "input")]
    pub spec: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Policy whose truth is reported.
    #[arg(long, value_parser = parse_policy, default_value = "identity")]
    pub policy: PolicySpec,
    #[arg(long, value_enum, default_value_t = TruthEngine::Exact)]
    pub truth: TruthEngine,
    /// Monte Carlo trajectories for `--truth mc`.
    #[arg(long)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchmarkFlags {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ValidateFlags {
    #[arg(long)]
    pub input: PathBuf,
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    match s {
        "sdr" => Ok(EstimatorKind::Sdr),
        "tmle" => Ok(EstimatorKind::Tmle),
        other => Err(format!("unknown estimator `{other}` (expected sdr or tmle)")),
    }
}

fn parse_policy(s: &str) -> Result<PolicySpec, String> {
    PolicySpec::parse(s).map_err(|e| format!("{e:#}"))
}

fn parse_horizons(s: &str) -> Result<Horizons, String> {
    Horizons::parse(s).map_err(|e| format!("{e:#}"))
}

/// Relative paths in a config file resolve against its directory.
fn anchor(path: &mut Option<PathBuf>, dir: &Path) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = dir.join(&*p);
        }
    }
}

/// Merges a config file with flag overrides. Returns the config and the
/// directory that relative policy tables resolve against.
pub fn resolve_estimate(flags: &EstimateFlags) -> CliResult<(RunConfig, PathBuf)> {
    let (mut config, dir) = match &flags.config {
        Some(path) => {
            let dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            let mut c = RunConfig::load(path).input()?;
            anchor(&mut c.input, &dir);
            anchor(&mut c.out, &dir);
            (c, dir)
        }
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(v) = &flags.input {
        config.input = Some(v.clone());
    }
    if let Some(v) = &flags.out {
        config.out = Some(v.clone());
    }
    if let Some(v) = flags.seed {
        config.seed = v;
    }
    if let Some(v) = flags.estimator {
        config.estimator = v;
    }
    if let Some(v) = &flags.policy {
        config.policy = v.clone();
    }
    if let Some(v) = &flags.reference {
        config.reference = Some(v.clone());
    }
    if let Some(v) = &flags.horizons {
        config.horizons = v.clone();
    }
    Ok((config, dir))
}

fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::Estimate(flags) => {
            let (config, dir) = resolve_estimate(flags)?;
            let out = commands::estimate::run(&config, &dir)?;
            log::info!("wrote {}", out.report.display());
            Ok(())
        }
        Command::Simulate(f) => commands::simulate::run(&SimulateArgs {
            spec: f.spec.clone(),
            n: f.n,
            seed: f.seed,
            out: f.out.clone(),
            policy: f.policy.clone(),
            truth: f.truth,
            replicates: f.replicates,
        }),
        Command::Benchmark(f) => {
            let mut config = BenchmarkConfig::load(&f.config).input()?;
            if let Some(s) = f.seed {
                config.seed = s;
            }
            let base = f.config.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            let out = match (&f.out, &config.out) {
                (Some(o), _) => o.clone(),
                (None, Some(o)) => base.join(o),
                (None, None) => return Err(CliError::input(anyhow::anyhow!("no output directory given"))),
            };
            commands::benchmark::run(&config, &base, &out).map(|_| ())
        }
        Command::Validate(f) => commands::validate::run(&f.input, None),
    }
}

/// Runs a parsed command line on a pool of `--threads` workers.
pub fn run(cli: &Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::input(anyhow::anyhow!("--threads must be positive")));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().input()?;
    pool.install(|| dispatch(&cli.command))
}
