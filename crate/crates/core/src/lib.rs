//! Model Confidence Set toolkit.
//!
//! The crate compares competing forecasting models through the sequential
//! Model Confidence Set procedure. Around that core it ships the pieces a
//! typical study needs:
//!
//! - [`losses`]: VaR (quantile), volatility and level loss functions that
//!   turn realized data and model outputs into a [`LossMatrix`].
//! - [`tsboot`]: moving-block bootstrap plans, AR-based block length
//!   selection and bootstrap variance of a mean.
//! - [`mcs`]: differentials, studentized statistics, bootstrap p-values and
//!   the elimination loop producing the Superior Set of Models.
//! - [`garch`]: GARCH(1,1), GJR-GARCH(1,1) and EGARCH(1,1) with Gaussian or
//!   Student-t innovations, fitted by maximum likelihood, with rolling
//!   one-step VaR forecasts.
//! - [`backtest`]: AE ratio, ADmean/ADmax and the static average VaR.
//! - [`cli`]: CSV ingestion, report rendering and the command pipeline
//!   behind the `mcs` binary.
//!
//! Every random quantity is derived from an explicit `u64` seed and results
//! do not depend on the number of rayon worker threads.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod cli;
mod error;
pub mod garch;
pub mod losses;
pub mod mcs;
pub mod optim;
pub mod tsboot;

pub use error::{Error, Result};
pub use losses::LossMatrix;
pub use mcs::{mcs_procedure, McsConfig, SsmResult, Statistic};
pub use tsboot::BootPlan;
