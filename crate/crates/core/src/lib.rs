//! Estimation of cause-specific cumulative incidence under longitudinal
//! modified treatment policies with right-censoring and competing risks.
//!
//! The crate is `no_std` (with `alloc`). It contains the data model, the
//! policy algebra, the nuisance learners, the cross-fitted sequentially
//! doubly robust (SDR) and targeted minimum loss (TMLE) estimators, the
//! curve post-processing and a simulation oracle with exact ground truth.
//! File formats and the command line live in the `lmtp` crate.
//!
//! Time indices in the public API are 1-based, matching the usual
//! notation `t = 1..=tau` with the final outcome measured at `tau + 1`.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
// Negated comparisons are deliberate: NaN must fail every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod estimators;
mod exec;
pub mod learners;
pub mod linalg;
pub mod nuisance;
pub mod oracle;
pub mod policy;
pub mod postprocess;
pub mod rng;
pub mod stats;

pub use data::{ExposureKind, LongitudinalDataset, MarkovLag};
pub use error::{Error, Result};
pub use estimators::{EstimateReport, EstimatorConfig, EstimatorKind};
pub use policy::Policy;
