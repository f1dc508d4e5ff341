//! Empirical Bayes rebiasing for many parallel estimation tasks.
//!
//! Each task observes a low-variance but biased estimate `theta_b_hat` of its
//! target together with a noisier unbiased estimate `b_hat` of the bias. The
//! crate learns the distribution of the biases across tasks (a normal family
//! or a grid-restricted nonparametric MLE) and uses it to produce rebiased
//! point estimates, calibrated equal-tailed intervals and p-values.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line front end and parallel simulation drivers live in `rebias-cli`.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` is used deliberately so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub use error::*;

pub mod fdr;
pub mod fit;
pub mod gwas;
pub mod law;
pub mod math;
pub mod model;
pub mod ppi;
pub mod prior;
pub mod sim;
pub mod task;

pub use fit::{
    fit_normal, fit_npmle, implied_marginal_curve, FitDiagnostics, NormalFit, NpmleConfig, NpmleFit,
};
pub use law::ConditionalLaw;
pub use model::{
    biased_interval, conditional_law, debiased_interval, marginal_density, posterior_mean,
    posterior_weights, rebias_interval, rebias_point, rebias_pvalue, IntervalReport, Method,
};
pub use prior::{DiscretePrior, NormalPrior, Prior};
pub use task::TaskSummary;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
