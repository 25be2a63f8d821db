#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Speculative load balancing for parallel queues: a job that has not
//! finished within a timeout is killed and re-routed once.
//!
//! - [`dists`]: parametric laws and the slowdown-times-size service model
//! - [`analytic`]: nominal loads, load reduction, optimal timeouts,
//!   the free-boundary value function and the mean-field response estimate
//! - [`fluid`]: Euler integration of the fluid model and its Lyapunov drain
//! - [`sim`]: discrete-event simulation of speculation and replication schemes
//! - [`harness`]: experiment specs, sweeps and CSV output behind the CLI

pub mod analytic;
pub mod dists;
pub mod error;
pub mod fluid;
pub mod harness;
pub mod quad;
pub mod sim;

pub use error::{Error, Result};
