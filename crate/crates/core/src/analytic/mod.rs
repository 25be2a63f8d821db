//! Closed-form loads, optimal timeouts and response-time estimates.

mod config;
mod load;
mod timeout;
mod value;

pub use config::NetworkConfig;
pub use load::{
    load_per_rate, load_reduction, nominal_load, rho_symmetric, slowdown_condition_holds,
    speculation_condition_holds, speculation_margin, symmetric_optimality_gap, OptimalityGap,
    SpeculationMargin,
};
pub use timeout::{load_reduction_curve, optimal_timeout, Diagnostics, Method, TimeoutSolution};
pub use value::{
    mean_field_response, second_visit_mean, second_visit_mean_slope, value_function,
    MeanFieldResponse,
};
