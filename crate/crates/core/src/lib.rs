//! Time-to-event modeling toolkit.
//!
//! - [`date`]: conditional adversarial generator of event times with a
//!   censored hinge loss, an L1 distortion loss and noise injected into every
//!   generator layer.
//! - [`draft`]: MLP-parameterized log-normal AFT with a censored likelihood
//!   and a smooth concordance lower bound.
//! - [`coxph`]: linear Cox proportional hazards with Efron ties.
//! - [`metrics`]: concordance index, relative/normalized errors and
//!   predictive-interval coverage.
//! - [`data`]: CSV ingestion, preprocessing, stratified splits and synthetic
//!   survival data.
//! - [`nn`]: the small autodiff and layer core the neural models run on.

// Range checks written as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coxph;
pub mod data;
pub mod date;
pub mod draft;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod predict;
pub mod rng;
pub mod stats;
pub mod survival;
#[cfg(test)]
pub(crate) mod testutil;
pub mod training;

pub use error::{Error, Result};
pub use par::Execution;
pub use predict::TimeSampler;
pub use survival::ParametricSurvival;
