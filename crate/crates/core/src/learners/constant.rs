use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{weighted_mean, Family, FittedModel, Learner};
use crate::error::Result;
use crate::linalg::Matrix;

/// Predicts the weighted training mean everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct Constant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantModel {
    pub value: f64,
}

impl FittedModel for ConstantModel {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        vec![self.value; x.rows()]
    }
}

impl Learner for Constant {
    fn name(&self) -> String {
        "constant".into()
    }

    fn fit(&self, _x: &Matrix, y: &[f64], weights: &[f64], _family: Family, _seed: u64) -> Result<Box<dyn FittedModel>> {
        Ok(Box::new(ConstantModel { value: weighted_mean(y, weights) }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicts_the_mean() {
        let m = Constant.fit(&Matrix::zeros(3, 1), &[0.0, 1.0, 1.0], &[1.0; 3], Family::Gaussian, 0).unwrap();
        assert!(m.predict(&Matrix::zeros(4, 1)).iter().all(|&v| (v - 2.0 / 3.0).abs() < 1e-15));
    }
}
