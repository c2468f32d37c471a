use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// SHA-256 over the canonical configuration (paths of input and output
/// removed, keys sorted) followed by the bytes of the input file.
pub fn config_digest(config: &RunConfig, input: &Path) -> Result<String> {
    let mut canonical = config.clone();
    canonical.input = None;
    canonical.out = None;
    let value = serde_json::to_value(&canonical)?;
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(&value)?.as_bytes());
    let bytes = std::fs::read(input).with_context(|| format!("cannot read `{}`", input.display()))?;
    hasher.update(Sha256::digest(&bytes));
    Ok(hex::encode(hasher.finalize()))
}

/// SHA-256 of a file, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read `{}`", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
