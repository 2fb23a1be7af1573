//! Dynamic multi-channel access with a prediction-augmented actor-critic agent.

// NaN must fail these range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod cpm;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod reward;
pub mod rng;

pub use error::{Error, Result};
