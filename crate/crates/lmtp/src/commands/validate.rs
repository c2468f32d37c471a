use std::path::Path;

use lmtp_core::data::ExposureKind;

use super::require_valid;
use crate::error::{CliResult, Classify};
use crate::io::read_dataset;

/// Logs a one-line summary on success and every violation on failure.
pub fn run(input: &Path, kind: Option<ExposureKind>) -> CliResult<()> {
    let data = read_dataset(input, kind).input()?;
    require_valid(&data)?;
    log::info!("ok: n={} tau={} exposure={:?}", data.n(), data.tau(), data.exposure_kind());
    Ok(())
}
