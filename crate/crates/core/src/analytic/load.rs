//! Nominal loads and the conditions under which a timeout lowers them.

use serde::Serialize;

use super::config::NetworkConfig;
use super::timeout::optimal_timeout;
use crate::dists::SxModel;
use crate::error::{Error, Result};

/// Relative guard below which two conditional means count as equal.
const EQUALITY_GUARD: f64 = 1e-12;

/// Per-queue nominal load with total arrival rate `λN`:
/// `ρᵢ = λN p0ᵢ E[η₁/μᵢ ∧ τᵢ] + λN Σⱼ p0ⱼ p1ᵢ P(η₁ > μⱼτⱼ) E[η₂/μᵢ | η₁/μⱼ > τⱼ]`.
pub fn nominal_load(cfg: &NetworkConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let total_rate = cfg.lambda * cfg.n as f64;
    // E[η₂ 1{η₁ > μⱼτⱼ}] in work units, per source queue j
    let mut rerouted_work = 0.0;
    for j in 0..cfg.n {
        if cfg.p0[j] == 0.0 {
            continue;
        }
        let w = cfg.model.work_moments(cfg.mu[j] * cfg.tau[j])?;
        rerouted_work += cfg.p0[j] * w.eta2_exceed;
    }
    (0..cfg.n)
        .map(|i| {
            let first = if cfg.p0[i] == 0.0 {
                0.0
            } else {
                cfg.p0[i] * cfg.model.work_moments(cfg.mu[i] * cfg.tau[i])?.trunc_mean / cfg.mu[i]
            };
            Ok(total_rate * (first + cfg.p1[i] * rerouted_work / cfg.mu[i]))
        })
        .collect()
}

/// `ρ(τ)/λ = E[η₁ ∧ τ] + P(η₁ > τ) E[η₂ | η₁ > τ]` for unit-rate symmetric queues.
pub fn load_per_rate(model: &SxModel, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "timeout must be positive, got {tau}"
        )));
    }
    let w = model.work_moments(tau)?;
    Ok(w.trunc_mean + w.eta2_exceed)
}

/// Symmetric load `ρ(τ)`.
pub fn rho_symmetric(lambda: f64, model: &SxModel, tau: f64) -> Result<f64> {
    Ok(lambda * load_per_rate(model, tau)?)
}

/// `L(τ) = ρ(τ) / (λ E[η₁])`; independent of `λ`.
pub fn load_reduction(model: &SxModel, tau: f64) -> Result<f64> {
    Ok(load_per_rate(model, tau)? / model.eta1_mean())
}

/// Both sides of the speculation condition at `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeculationMargin {
    /// `E[η₂ | η₁ > τ]`
    pub restart_mean: f64,
    /// `E[η₁ − τ | η₁ > τ]`
    pub remaining_mean: f64,
}

impl SpeculationMargin {
    pub fn holds(&self) -> bool {
        self.restart_mean < self.remaining_mean * (1.0 - EQUALITY_GUARD)
    }
}

pub fn speculation_margin(model: &SxModel, tau: f64) -> Result<SpeculationMargin> {
    let w = model.work_moments(tau)?;
    if w.exceed_prob <= 0.0 {
        return Err(Error::DegenerateConditioning { t: tau });
    }
    Ok(SpeculationMargin {
        restart_mean: w.eta2_exceed / w.exceed_prob,
        remaining_mean: w.excess_mean / w.exceed_prob,
    })
}

/// True iff a fresh execution is expected to be shorter than the remaining
/// time of a job that has run past `τ`: `E[η₂ | η₁ > τ] < E[η₁ − τ | η₁ > τ]`.
/// Equivalent to `L(τ) < 1`.
pub fn speculation_condition_holds(model: &SxModel, tau: f64) -> Result<bool> {
    Ok(speculation_margin(model, tau)?.holds())
}

/// Slowdown condition at `z`: `E[Sx ∧ z] < P(Sx ≤ z) E[S] x` for every `x`
/// in the support of `X`. Continuous sizes are checked on a 10³-point
/// quantile grid.
pub fn slowdown_condition_holds(model: &SxModel, z: f64) -> Result<bool> {
    if !(z > 0.0) {
        return Err(Error::InvalidConfig(format!("z must be positive, got {z}")));
    }
    let s = &model.slowdown;
    let mean_s = s.mean();
    let holds_at = |x: f64| {
        if x <= 0.0 {
            return false;
        }
        let lhs = x * s.limited_mean(z / x);
        let rhs = s.cdf(z / x) * mean_s * x;
        lhs < rhs * (1.0 - EQUALITY_GUARD)
    };
    let xs: Vec<f64> = if model.size.is_discrete() {
        model
            .size
            .atoms()
            .iter()
            .filter(|a| a.1 > 0.0)
            .map(|a| a.0)
            .collect()
    } else {
        (0..1000)
            .map(|k| model.size.quantile((k as f64 + 0.5) / 1000.0))
            .collect()
    };
    Ok(xs.into_iter().all(holds_at))
}

/// Both sides of `max_i ρ_i ≥ inf_τ ρ(τ)` for unit-rate queues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalityGap {
    pub max_rho: f64,
    pub inf_rho: f64,
}

/// Compares an arbitrary configuration against the best symmetric timeout.
pub fn symmetric_optimality_gap(cfg: &NetworkConfig) -> Result<OptimalityGap> {
    cfg.validate()?;
    if cfg.mu.iter().any(|&m| m != 1.0) {
        return Err(Error::RequiresHomogeneousRates);
    }
    let loads = nominal_load(cfg)?;
    let max_rho = loads.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best = cfg.model.eta1_mean();
    if let Ok(sol) = optimal_timeout(&cfg.model, None) {
        best = best.min(sol.rho_at_star);
    }
    for &t in &cfg.tau {
        best = best.min(load_per_rate(&cfg.model, t)?);
    }
    Ok(OptimalityGap {
        max_rho,
        inf_rho: cfg.lambda * best,
    })
}
