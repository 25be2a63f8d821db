//! Conditional restart means, the free-boundary value function and the
//! mean-field response time estimate.

use serde::Serialize;

use super::load::load_per_rate;
use crate::dists::SxModel;
use crate::error::{Error, Result};
use crate::quad::{integrate, Tolerance};

/// `η̄₂(t) = E[η₂ | η₁ > t]`.
pub fn second_visit_mean(m: &SxModel, t: f64) -> Result<f64> {
    let w = m.work_moments(t)?;
    if w.exceed_prob <= 0.0 {
        return Err(Error::DegenerateConditioning { t });
    }
    Ok(w.eta2_exceed / w.exceed_prob)
}

/// `η̄₂′(t)`: zero when `η₂` is independent of `η₁`, else a central difference.
pub fn second_visit_mean_slope(m: &SxModel, t: f64) -> Result<f64> {
    if m.eta2_independent() {
        second_visit_mean(m, t)?;
        return Ok(0.0);
    }
    let h = (1e-4 * t).max(1e-6);
    let lo = (t - h).max(0.0);
    Ok((second_visit_mean(m, t + h)? - second_visit_mean(m, lo)?) / (t + h - lo))
}

/// `V_τ(t) = (η̄₂(τ)F̄₁(τ) + ∫ₜ^τ F̄₁(s) ds) / F̄₁(t)`: expected remaining work
/// of a job that has run for `t` when it is killed at `τ` and restarted.
pub fn value_function(m: &SxModel, tau: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t <= tau) {
        return Err(Error::InvalidParameters(format!(
            "need 0 ≤ t ≤ τ, got t={t}, τ={tau}"
        )));
    }
    let survivor = m.eta1_ccdf(t);
    if survivor <= 0.0 {
        return Err(Error::ZeroSurvivorMass { t });
    }
    let restart = m.work_moments(tau)?.eta2_exceed;
    let knots = m.eta1_breakpoints();
    let run = integrate(|s| m.eta1_ccdf(s), t, tau, &knots, Tolerance::default())?;
    Ok((restart + run) / survivor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldResponse {
    /// Mean waiting time per visit.
    #[serde(rename = "W")]
    pub w: f64,
    /// Second moment of the work brought by one visit.
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "R_infinity")]
    pub r_infinity: f64,
    pub rho: f64,
}

/// Large-`N` mean response time for symmetric unit-rate queues, treating each
/// queue as M/G/1 with visit rate `λ(1+P)`:
/// `R∞ = (1+P)W + ρ/λ`, `W = λ(1+P)M / (2(1−ρ))`.
pub fn mean_field_response(lambda: f64, m: &SxModel, tau: f64) -> Result<MeanFieldResponse> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let per_rate = load_per_rate(m, tau)?;
    let rho = lambda * per_rate;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let mo = m.moments(1.0, tau)?;
    let p = mo.p_timeout;
    let restart_sq = if p > 0.0 {
        mo.eta2_cond_second.unwrap_or(0.0) * p
    } else {
        0.0
    };
    if !mo.truncated_second.is_finite() || !restart_sq.is_finite() {
        return Err(Error::InfiniteMoment);
    }
    let second = (mo.truncated_second + restart_sq) / (1.0 + p);
    let w = 0.5 * lambda * (1.0 + p) * second / (1.0 - rho);
    Ok(MeanFieldResponse {
        w,
        m: second,
        r_infinity: (1.0 + p) * w + per_rate,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::{DistributionSpec, SxMode};

    fn bimodal() -> SxModel {
        SxModel::unit_size(DistributionSpec::bimodal(10.0, 1e3, 0.99))
    }

    #[test]
    fn bimodal_response_chain() {
        let r = mean_field_response(0.04, &bimodal(), 10.0).unwrap();
        let m = (100.0 + 10099.0 * 0.01) / 1.01;
        let rho = 0.04 * 10.199;
        let w = 0.02 * 1.01 * m / (1.0 - rho);
        assert!((r.m - m).abs() < 1e-9);
        assert!((r.rho - 0.40796).abs() < 1e-12);
        assert!((r.w - w).abs() < 1e-9 && (r.w - 6.790).abs() < 1e-3);
        assert!((r.r_infinity - (1.01 * w + 10.199)).abs() < 1e-9);
        assert!((r.r_infinity - 17.06).abs() < 5e-3);
    }

    #[test]
    fn no_timeout_is_pollaczek_khinchine() {
        let m = bimodal();
        let lambda = 0.03;
        let r = mean_field_response(lambda, &m, f64::INFINITY).unwrap();
        let es2 = 0.99 * 100.0 + 0.01 * 1e6;
        let rho = lambda * 19.9;
        assert!((r.r_infinity - (lambda * es2 / (2.0 * (1.0 - rho)) + 19.9)).abs() < 1e-9);
    }

    #[test]
    fn response_errors() {
        assert!(matches!(
            mean_field_response(0.1, &bimodal(), 10.0),
            Err(Error::Unstable { .. })
        ));
        let pareto = SxModel::unit_size(DistributionSpec::Pareto {
            alpha: 1.5,
            s_m: 1.0,
        });
        assert_eq!(
            mean_field_response(0.1, &pareto, 4.5),
            Err(Error::InfiniteMoment)
        );
        let r = mean_field_response(0.0, &bimodal(), 10.0).unwrap();
        assert_eq!(r.w, 0.0);
        assert!((r.r_infinity - 10.199).abs() < 1e-12);
    }

    #[test]
    fn second_visit_examples() {
        let pareto = SxModel::unit_size(DistributionSpec::Pareto {
            alpha: 1.5,
            s_m: 1.0,
        });
        assert!((second_visit_mean(&pareto, 7.0).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(second_visit_mean_slope(&pareto, 7.0).unwrap(), 0.0);
        let det = SxModel::new(
            DistributionSpec::Deterministic { v: 5.0 },
            DistributionSpec::Deterministic { v: 1.0 },
            SxMode::Identical,
        );
        assert_eq!(second_visit_mean(&det, 3.0).unwrap(), 5.0);
        assert_eq!(
            second_visit_mean(&det, 5.0),
            Err(Error::DegenerateConditioning { t: 5.0 })
        );
    }

    #[test]
    fn value_function_boundaries() {
        let pareto = SxModel::unit_size(DistributionSpec::Pareto {
            alpha: 1.5,
            s_m: 1.0,
        });
        for tau in [2.0, 4.5, 20.0] {
            let at_tau = value_function(&pareto, tau, tau).unwrap();
            assert!((at_tau - 3.0).abs() < 1e-12);
            let v0 = value_function(&pareto, tau, 0.0).unwrap();
            let rho = load_per_rate(&pareto, tau).unwrap();
            assert!((v0 - rho).abs() <= 1e-8 * rho);
        }
    }

    #[test]
    fn value_function_sign_change_at_optimum() {
        let pareto = SxModel::unit_size(DistributionSpec::Pareto {
            alpha: 1.5,
            s_m: 1.0,
        });
        let d = |tau: f64| {
            let h = 1e-4;
            (value_function(&pareto, tau + h, 0.0).unwrap()
                - value_function(&pareto, tau - h, 0.0).unwrap())
                / (2.0 * h)
        };
        assert!(d(4.0) < 0.0);
        assert!(d(5.0) > 0.0);
    }
}
