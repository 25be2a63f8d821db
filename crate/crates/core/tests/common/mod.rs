#![allow(dead_code)]

use proptest::prelude::*;
use speclb::dists::{DistributionSpec, SxMode, SxModel};

pub fn bimodal() -> SxModel {
    SxModel::unit_size(DistributionSpec::bimodal(10.0, 1e3, 0.99))
}

/// Slowdown laws with finite mean; `min_alpha` bounds Pareto tails from below.
pub fn slowdown(min_alpha: f64) -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (1.0..20.0f64, 50.0..2000.0f64, 0.5..0.999f64)
            .prop_map(|(a, b, p)| DistributionSpec::bimodal(a, b, p)),
        (min_alpha..4.0f64, 0.2..3.0f64)
            .prop_map(|(alpha, s_m)| DistributionSpec::Pareto { alpha, s_m }),
        (0.5..0.999f64, 0.5..3.0f64, 0.005..0.2f64).prop_map(|(w, r1, r2)| {
            DistributionSpec::hyperexponential(vec![w, 1.0 - w], vec![r1, r2])
        }),
        (0.1..5.0f64).prop_map(|rate| DistributionSpec::Exponential { rate }),
        (2u32..6, 0.2..3.0f64).prop_map(|(k, rate)| DistributionSpec::Erlang { k, rate }),
        (0.0..1.0f64, 1.5..5.0f64).prop_map(|(a, b)| DistributionSpec::Uniform { a, b }),
    ]
}

pub fn size() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        Just(DistributionSpec::Deterministic { v: 1.0 }),
        Just(DistributionSpec::Uniform { a: 0.0, b: 2.0 }),
        Just(DistributionSpec::bimodal(1.0, 3.0, 0.7)),
    ]
}

pub fn mode() -> impl Strategy<Value = SxMode> {
    prop_oneof![
        Just(SxMode::Restart),
        Just(SxMode::Resume),
        Just(SxMode::Identical)
    ]
}

pub fn model(min_alpha: f64) -> impl Strategy<Value = SxModel> {
    (slowdown(min_alpha), size(), mode()).prop_map(|(s, x, m)| SxModel::new(s, x, m))
}

pub fn restart_model(min_alpha: f64) -> impl Strategy<Value = SxModel> {
    (slowdown(min_alpha), size()).prop_map(|(s, x)| SxModel::new(s, x, SxMode::Restart))
}
