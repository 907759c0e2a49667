//! Asynchronous adaptation over networks.
//!
//! Simulates the four stochastic-gradient strategies (distributed or
//! centralized, synchronous or asynchronous) on a streaming linear-regression
//! task and evaluates the closed-form steady-state and convergence-rate
//! predictors for each of them.
//!
//! Module map:
//!
//! * [`network`]: agent graphs, the Bernoulli asynchronous model and its
//!   per-iteration realizations.
//! * [`moments`]: exact moments of the random combination matrix, Perron
//!   vectors and the matched fusion moments.
//! * [`theory`]: step-size moments, stability gates, `H`, `R`, `F` and the
//!   MSD predictors.
//! * [`sim`]: the four adaptive strategies, trial averaging and steady-state
//!   estimation.
//! * [`harness`]: configuration, presets, the comparison report and the
//!   validation suite.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod linalg;
pub mod moments;
pub mod network;
pub mod rng;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
