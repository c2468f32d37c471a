//! Structural-equation data generators with known laws, and ground truth
//! for the estimand under a policy: Monte Carlo over the intervened world
//! and exact enumeration for fully discrete specs.

mod simulate;
mod spec;
mod truth;

pub use simulate::{monte_carlo_truth, simulate_observed};
pub use spec::{DgpSpec, EndStep, Law, Path, Step, Table, Term, Var, VarRef};
pub use truth::{
    exhaustive_truth, forward_truth, joint_perturbation_bias, observed_outcome_probability, pseudo_outcome_gap,
    ExactNuisance, ExactRegression, ObservedLaw, PathNuisance, Perturbed, PATH_LIMIT,
};

/// How a ground-truth value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TruthMethod {
    Exact,
    MonteCarlo,
}

/// Ground truth at one horizon.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruthReport {
    pub horizon: usize,
    pub theta: f64,
    pub method: TruthMethod,
    /// Monte Carlo replicate count.
    pub replicates: Option<usize>,
    /// Monte Carlo standard error.
    pub mc_se: Option<f64>,
}
