//! Wide CSV datasets and the tabular outputs.
//!
//! Dataset columns, one row per unit, looked up by header name:
//! `L0_<j>` (baseline), then for each `t`: `A<t>` (or `A<t>_<j>` for
//! vector exposures), `C<t>`, `D<t>`, `Y<t>`, `L<t>_<j>`; finally
//! `Y<tau+1>`.
//!
//! Within a time step the variables are generated in the order `D`, `Y`,
//! `L`, `A`, `C`. The flat layout does not encode this order, and it
//! cannot be checked from the data. Cells after censoring or after an
//! event hold 0.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use lmtp_core::data::{DatasetParts, ExposureKind, LongitudinalDataset};
use lmtp_core::linalg::Matrix;
use lmtp_core::postprocess::ProjectedCurve;

struct Header {
    index: HashMap<String, usize>,
}

impl Header {
    fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn need(&self, name: &str) -> Result<usize> {
        self.get(name).ok_or_else(|| anyhow!("missing column `{name}`"))
    }

    /// Columns `<prefix>_0, <prefix>_1, ...` up to the first gap.
    fn block(&self, prefix: &str) -> Vec<usize> {
        (0..).map_while(|j| self.get(&format!("{prefix}_{j}"))).collect()
    }
}

/// Reads a dataset. `kind` fixes the exposure kind; when absent it is
/// inferred: integer values in `0..64` give a discrete exposure with
/// levels `0..=max`, anything else a continuous one.
pub fn read_dataset(path: &Path, kind: Option<ExposureKind>) -> Result<LongitudinalDataset> {
    let file = File::open(path).with_context(|| format!("cannot open `{}`", path.display()))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header = Header {
        index: reader.headers()?.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect(),
    };
    let tau = (1..).take_while(|t| header.get(&format!("A{t}")).is_some() || header.get(&format!("A{t}_0")).is_some()).count();
    if tau == 0 {
        bail!("no exposure columns (`A1` or `A1_0`) found");
    }
    let exposure_cols: Vec<Vec<usize>> = (1..=tau)
        .map(|t| match header.get(&format!("A{t}")) {
            Some(c) => vec![c],
            None => header.block(&format!("A{t}")),
        })
        .collect();
    let baseline_cols = header.block("L0");
    let covariate_cols: Vec<Vec<usize>> = (1..=tau).map(|t| header.block(&format!("L{t}"))).collect();
    let indicator = |name: &str| header.need(name);
    let c_cols: Vec<usize> = (1..=tau).map(|t| indicator(&format!("C{t}"))).collect::<Result<_>>()?;
    let d_cols: Vec<usize> = (1..=tau).map(|t| indicator(&format!("D{t}"))).collect::<Result<_>>()?;
    let y_cols: Vec<usize> = (1..=tau).map(|t| indicator(&format!("Y{t}"))).collect::<Result<_>>()?;
    let final_col = indicator(&format!("Y{}", tau + 1))?;

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        rows.push(record.with_context(|| format!("row {}", k + 2))?);
    }
    let n = rows.len();
    if n == 0 {
        bail!("dataset has no rows");
    }
    let cell = |i: usize, c: usize| -> Result<f64> {
        let raw = rows[i].get(c).ok_or_else(|| anyhow!("row {} is ragged", i + 2))?;
        if raw.is_empty() {
            bail!("missing value in row {}, column {}", i + 2, c + 1);
        }
        let v: f64 = raw.parse().with_context(|| format!("row {}: `{raw}` is not a number", i + 2))?;
        if !v.is_finite() {
            bail!("row {}: non-finite value `{raw}`", i + 2);
        }
        Ok(v)
    };
    // Empty covariate or exposure cells load as NaN so that validation
    // can report them alongside every other violation.
    let matrix = |cols: &[usize]| -> Result<Matrix> {
        let mut m = Matrix::zeros(n, cols.len());
        for i in 0..n {
            for (j, &c) in cols.iter().enumerate() {
                let empty = rows[i].get(c).is_some_and(str::is_empty);
                m.set(i, j, if empty { f64::NAN } else { cell(i, c)? });
            }
        }
        Ok(m)
    };
    let binary = |c: usize| -> Result<Vec<u8>> {
        (0..n)
            .map(|i| match cell(i, c)? {
                0.0 => Ok(0),
                1.0 => Ok(1),
                v => bail!("row {}: indicator value {v} is not 0 or 1", i + 2),
            })
            .collect()
    };
    for row in &rows {
        if row.len() != header.index.len() {
            bail!("ragged row with {} fields (header has {})", row.len(), header.index.len());
        }
    }
    let exposure: Vec<Matrix> = exposure_cols.iter().map(|c| matrix(c)).collect::<Result<_>>()?;
    let exposure_kind = match kind {
        Some(k) => k,
        None => infer_kind(&exposure),
    };
    let parts = DatasetParts {
        baseline: matrix(&baseline_cols)?,
        covariates: covariate_cols.iter().map(|c| matrix(c)).collect::<Result<_>>()?,
        exposure,
        censoring: c_cols.iter().map(|&c| binary(c)).collect::<Result<_>>()?,
        competing: d_cols.iter().map(|&c| binary(c)).collect::<Result<_>>()?,
        outcome: y_cols.iter().map(|&c| binary(c)).collect::<Result<_>>()?,
        final_outcome: binary(final_col)?,
        exposure_kind,
    };
    Ok(LongitudinalDataset::new(parts)?)
}

fn infer_kind(exposure: &[Matrix]) -> ExposureKind {
    let values = || exposure.iter().flat_map(|m| m.as_slice().iter().copied());
    let integral = values().filter(|v| !v.is_nan()).all(|v| v.fract() == 0.0 && (0.0..64.0).contains(&v));
    if integral {
        let max = values().filter(|v| !v.is_nan()).fold(0.0, f64::max) as usize;
        ExposureKind::Discrete { levels: (max + 1).max(2) }
    } else {
        ExposureKind::Continuous
    }
}

pub fn dataset_header(data: &LongitudinalDataset) -> Vec<String> {
    let mut h: Vec<String> = (0..data.baseline().cols()).map(|j| format!("L0_{j}")).collect();
    let q = data.exposure_width();
    for t in 1..=data.tau() {
        if q == 1 {
            h.push(format!("A{t}"));
        } else {
            h.extend((0..q).map(|j| format!("A{t}_{j}")));
        }
        h.extend([format!("C{t}"), format!("D{t}"), format!("Y{t}")]);
        h.extend((0..data.covariates(t).cols()).map(|j| format!("L{t}_{j}")));
    }
    h.push(format!("Y{}", data.tau() + 1));
    h
}

pub fn write_dataset(data: &LongitudinalDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create `{}`", path.display()))?;
    w.write_record(dataset_header(data))?;
    for i in 0..data.n() {
        let mut row: Vec<String> = data.baseline().row(i).iter().map(|v| v.to_string()).collect();
        for t in 1..=data.tau() {
            row.extend(data.exposure(t).row(i).iter().map(|v| v.to_string()));
            row.extend([data.censoring(t)[i], data.competing(t)[i], data.outcome(t)[i]].iter().map(|v| v.to_string()));
            row.extend(data.covariates(t).row(i).iter().map(|v| v.to_string()));
        }
        row.push(data.final_outcome()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve(curve: &ProjectedCurve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["horizon", "theta_raw", "theta_proj", "se", "ci_lo", "ci_hi", "band_lo", "band_hi", "p_adj"])?;
    for k in 0..curve.horizons.len() {
        w.write_record([
            curve.horizons[k].to_string(),
            curve.raw[k].to_string(),
            curve.projected[k].to_string(),
            curve.se[k].to_string(),
            curve.ci_low[k].to_string(),
            curve.ci_high[k].to_string(),
            curve.band_low[k].to_string(),
            curve.band_high[k].to_string(),
            curve.p_adjusted[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Units by horizons, one column `h<k>` per horizon.
pub fn write_eif(horizons: &[usize], eif: &Matrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["unit".to_string()];
    header.extend(horizons.iter().map(|h| format!("h{h}")));
    w.write_record(&header)?;
    for i in 0..eif.rows() {
        let mut row = vec![i.to_string()];
        row.extend(eif.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("cannot create `{}`", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_inference() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "L0_0,A1,C1,D1,Y1,L1_0,A2,C2,D2,Y2,L2_0,Y3\n0.5,1,1,0,0,1,0,1,0,0,2,1\n1.5,0,0,0,0,0,0,0,0,0,0,0\n").unwrap();
        let data = read_dataset(&path, None).unwrap();
        assert_eq!(data.tau(), 2);
        assert_eq!(data.exposure_kind(), &ExposureKind::Discrete { levels: 2 });
        let out = dir.path().join("e.csv");
        write_dataset(&data, &out).unwrap();
        assert_eq!(read_dataset(&out, None).unwrap(), data);
    }

    #[test]
    fn missing_and_malformed_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "A1,C1,D1,Y1,Y2\n1,,0,0,0\n").unwrap();
        assert!(read_dataset(&path, None).unwrap_err().to_string().contains("missing value"));
        std::fs::write(&path, "A1,C1,D1,Y1,Y2\n1,2,0,0,0\n").unwrap();
        assert!(read_dataset(&path, None).is_err());
        std::fs::write(&path, "A1,C1,D1,Y1\n1,1,0,0\n").unwrap();
        assert!(read_dataset(&path, None).unwrap_err().to_string().contains("Y2"));
    }
}
