use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{weighted_mean, Family, FittedModel, Learner};
use crate::error::Result;
use crate::linalg::Matrix;

/// Weighted cell means over distinct design rows. Rows never seen in
/// training get the overall mean. Correctly specified for any regression
/// on a finite discrete design.
#[derive(Debug, Clone, Copy, Default)]
pub struct Saturated;

#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedModel {
    cells: BTreeMap<Vec<u64>, f64>,
    fallback: f64,
}

fn key(row: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 share a cell
    row.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl FittedModel for SaturatedModel {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|i| self.cells.get(&key(x.row(i))).copied().unwrap_or(self.fallback))
            .collect()
    }
}

impl Learner for Saturated {
    fn name(&self) -> String {
        "saturated".into()
    }

    fn fit(&self, x: &Matrix, y: &[f64], weights: &[f64], _family: Family, _seed: u64) -> Result<Box<dyn FittedModel>> {
        let mut acc: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
        for i in 0..x.rows() {
            let e = acc.entry(key(x.row(i))).or_insert((0.0, 0.0));
            e.0 += weights[i] * y[i];
            e.1 += weights[i];
        }
        let fallback = weighted_mean(y, weights);
        let cells = acc
            .into_iter()
            .map(|(k, (sy, sw))| (k, if sw > 0.0 { sy / sw } else { fallback }))
            .collect();
        Ok(Box::new(SaturatedModel { cells, fallback }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_means_and_fallback() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [0.0, 1.0], [1.0, 0.0], [-0.0, 1.0]]).unwrap();
        let m = Saturated.fit(&x, &[1.0, 0.0, 1.0, 1.0], &[1.0, 1.0, 1.0, 2.0], Family::Binomial, 0).unwrap();
        let p = m.predict(&Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [5.0, 5.0]]).unwrap());
        assert_eq!(p, alloc::vec![0.75, 1.0, 0.8]);
    }
}
