//! Empirical-Bayes mean estimation from replicated observations.
//!
//! Each of `n` units is observed `B` times under conditionally i.i.d. noise.
//! The estimators here recover the per-unit means by holding one replicate
//! out as a regression response and regressing it on the order statistics of
//! the remaining replicates, then averaging over the choice of held-out
//! replicate. Because the order statistics are sufficient for exchangeable
//! noise, this learns the posterior mean without any assumption on the prior
//! or the noise family.
//!
//! The crate is organized as:
//!
//! * [`replicate`] - the validated `n x B` data matrix and the
//!   split-and-order transformation,
//! * [`driver`] - the generic estimation loop, parameterized by any
//!   regressor, plus held-out targets beyond the mean,
//! * [`regressors`] - ordinary least squares on order statistics and
//!   k-nearest-neighbor regression with leave-one-out selection of k,
//! * [`estimators`] - the named end-to-end methods (`auroral`, `aurora-knn`,
//!   `ccl`, location baselines, James-Stein, Pareto MLE),
//! * [`oracles`] - closed-form posterior means, oracle risks, efficient
//!   L-statistic weights and the van Trees bound for calibration,
//! * [`simlab`] - scenario generators and a seeded, bit-reproducible Monte
//!   Carlo harness,
//! * [`io`] - CSV and JSON formats behind the `aurora` command-line tool.

pub mod driver;
pub mod error;
pub mod estimators;
pub mod io;
pub mod matrix;
pub mod oracles;
pub mod regressors;
pub mod replicate;
pub mod simlab;

pub(crate) mod par;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use replicate::{split_and_order, EstimateVector, ReplicateMatrix, SplitView};
