use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::{weighted_mean, Family, FittedModel, Learner, Scaler};
use crate::error::Result;
use crate::linalg::Matrix;

/// k-nearest-neighbour smoother on standardized features. Distance ties
/// are broken by training row order; the prediction is the weighted mean
/// response of the neighbours.
#[derive(Debug, Clone, Copy)]
pub struct Knn {
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    scaler: Scaler,
    x: Matrix,
    y: Vec<f64>,
    w: Vec<f64>,
    fallback: f64,
}

impl FittedModel for KnnModel {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        let p = self.scaler.width();
        let mut q = alloc::vec![0.0; p];
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.x.rows());
        (0..x.rows())
            .map(|i| {
                self.scaler.transform_row(x.row(i), &mut q);
                dist.clear();
                dist.extend((0..self.x.rows()).map(|r| {
                    let d: f64 = self.x.row(r).iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, r)
                }));
                let k = self.k.min(dist.len());
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < dist.len() {
                    dist.select_nth_unstable_by(k - 1, cmp);
                }
                let (sy, sw) = dist[..k]
                    .iter()
                    .fold((0.0, 0.0), |(sy, sw), &(_, r)| (sy + self.w[r] * self.y[r], sw + self.w[r]));
                if sw > 0.0 {
                    sy / sw
                } else {
                    self.fallback
                }
            })
            .collect()
    }
}

impl Learner for Knn {
    fn name(&self) -> String {
        alloc::format!("knn(k={})", self.k)
    }

    fn fit(&self, x: &Matrix, y: &[f64], weights: &[f64], _family: Family, _seed: u64) -> Result<Box<dyn FittedModel>> {
        let scaler = Scaler::fit(x);
        Ok(Box::new(KnnModel {
            k: self.k.max(1),
            x: scaler.transform(x),
            scaler,
            y: y.to_vec(),
            w: weights.to_vec(),
            fallback: weighted_mean(y, weights),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averages_nearest_rows() {
        let x = Matrix::column(&[0.0, 1.0, 2.0, 10.0, 11.0]);
        let m = Knn { k: 2 }.fit(&x, &[0.0, 1.0, 0.0, 5.0, 7.0], &[1.0; 5], Family::Gaussian, 0).unwrap();
        let p = m.predict(&Matrix::column(&[10.4, 0.2]));
        assert_eq!(p, alloc::vec![6.0, 0.5]);
    }
}
