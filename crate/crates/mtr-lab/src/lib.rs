//! Experiment lab for learning under unreliable feedback.
//!
//! A monitor/trust/regulator loop wraps gradient-based learners: the monitor
//! records stability descriptors of the learning dynamics over a sliding
//! window, the trust estimator clusters them into per-key trust weights on a
//! slow timescale, and the regulator softly reweights the learning objective
//! with those weights. Three desk-scale testbeds exercise the loop: a
//! PPO-style discrete-action learner under reward corruption, a supervised
//! classifier under structured label bias (diagnostics only), and a scalar
//! belief-formation simulation.

pub mod belieflab;
pub mod cli;
pub mod core;
pub mod envs;
pub mod error;
pub mod metrics;
pub mod monitor;
pub mod numkernel;
pub mod rl;
pub mod sl;
pub mod trust;

pub use error::{Error, Result};
