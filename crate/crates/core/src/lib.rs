//! Sales forecasting for non-stationary store time series.
//!
//! A feed-forward network over embedded and one-hot store features
//! predicts normalized sales `y_main`; a trend block predicts a per-row
//! weight `w`, and the forecast is `y_main + w·t` for normalized time `t`.
//!
//! ```no_run
//! use trendcast::cli::{cmd_eval, cmd_train};
//! use trendcast::config::RunConfig;
//!
//! let mut cfg = RunConfig::default();
//! cfg.model.trend_block_enabled = false;
//! cmd_train(&cfg)?;
//! cfg.model.trend_block_enabled = true;
//! cmd_train(&cfg)?;
//! let report = cmd_eval(&cfg, &[], None)?;
//! println!("{} -> {:?}", report.rmse_overall, report.rmse_trend);
//! # Ok::<(), trendcast::Error>(())
//! ```

// `!(x > 0.0)` is used throughout to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autograd;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
