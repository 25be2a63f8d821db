//! Experiment specs, sweeps and CSV writers behind the `speclb` binary.

mod commands;
pub mod plot;
mod spec;

pub use commands::*;
pub use spec::{parse_json5, parse_model, read_json5, read_model, ExperimentSpec, TauChoice};
