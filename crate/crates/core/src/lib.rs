//! Fair binary classification by adaptive priority reweighing.
//!
//! A weighted logistic-regression trainer sits inside an outer loop that
//! reweighs training rows twice over: once per `(label, sensitive)` subgroup,
//! using the ratio of expected to observed cell frequencies of the current
//! predictions, and once within each subgroup, favouring rows whose score
//! lies close to the decision boundary.
//!
//! Modules, bottom-up:
//!
//! * [`dataset`]: CSV loading, splitting, standardization, subgroup counts
//!   and a synthetic biased generator.
//! * [`metrics`]: accuracy and the demographic-parity, equalized-odds and
//!   equal-opportunity gaps.
//! * [`classifier`]: logistic scorer and mini-batch SGD on a sample-weighted
//!   cross-entropy.
//! * [`reweigher`]: margin and subgroup-weight updates and the outer
//!   training loop for each fairness criterion.
//! * [`baselines`]: unweighted ERM, group-size cutting and static
//!   reweighing.
//! * [`harness`]: experiment configuration, replicated runs, grid search
//!   with cross-validation and result rendering.

// `!(x >= 0.0)` rejects NaN too; 2×2 cell loops read best indexed.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod classifier;
pub mod dataset;
mod error;
pub mod harness;
pub mod metrics;
pub mod reweigher;

pub use error::{Error, Result};
