//! Inference with high-dimensional vector-valued U-statistics of order two.
//!
//! The crate computes full and sequential U-statistics for several symmetric
//! kernels, estimates the covariance of their linear projection by the
//! jackknife, and builds two procedures on top:
//!
//! * [`cpdetect`]: a first-versus-last CUSUM test for a single change point,
//!   calibrated with simulated Brownian bridges scaled by the estimated
//!   covariance root, plus the argmax location estimator;
//! * [`sntest`]: a self-normalized two-sample test of
//!   `|theta_1 - theta_2|^2 <= delta` whose limit law is pivotal.
//!
//! [`studies`] wraps both in seeded Monte Carlo experiments.

pub mod cpdetect;
pub mod dist;
pub mod error;
pub mod gaussmc;
pub mod kernels;
pub mod sample;
pub mod sim;
pub mod sntest;
pub mod studies;
pub mod useq;

#[cfg(test)]
mod testutil;

pub use cpdetect::{cusum_process, cusum_statistic, detect_change, CusumResult, DriftSpec};
pub use dist::Marginal;
pub use error::{Error, Result};
pub use gaussmc::{BridgePathSet, RngSpec};
pub use kernels::KernelSpec;
pub use sample::{Sample, SeqPath};
pub use sim::{simulate_dataset, Design};
pub use sntest::{run_relevant_test, RelevantTestConfig, SNReport};
pub use useq::{
    covariance_estimate, full_ustat, jackknife_projections, sequential_t, CovarianceEstimate,
};
