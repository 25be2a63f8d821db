//! Service and slowdown distributions, the S&X service model, random streams.

mod rng;
mod spec;
mod sx;

pub use rng::{mix_seed, stream, Purpose};
pub use spec::DistributionSpec;
pub use sx::{OracleEstimate, SxMode, SxModel, SxMoments, WorkMoments};
