//! Load-optimal timeouts.

use serde::Serialize;

use super::load::load_per_rate;
use super::value::{second_visit_mean, second_visit_mean_slope};
use crate::dists::SxModel;
use crate::error::{Error, Result};

const GRID_POINTS: usize = 2001;
const LOWER_QUANTILE: f64 = 1e-4;
const UPPER_QUANTILE: f64 = 1.0 - 1e-6;
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    HazardRule,
    DirectMinimization,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::HazardRule => "hazard-rule",
            Method::DirectMinimization => "direct-minimization",
        })
    }
}

/// What was checked on the search grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub interval: (f64, f64),
    pub grid_points: usize,
    pub has_density: bool,
    /// Hazard of `η₁` nonincreasing on the grid.
    pub hazard_nonincreasing: bool,
    /// `t ↦ (1 + η̄₂′(t))/η̄₂(t)` nondecreasing on the grid.
    pub rule_monotone: bool,
    /// Hazard rule holds with equality everywhere; every τ gives the same load.
    pub flat: bool,
}

impl Diagnostics {
    pub fn assumption_held(&self) -> bool {
        self.has_density && self.hazard_nonincreasing && self.rule_monotone
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeoutSolution {
    pub tau_star: f64,
    /// `ρ(τ*)/λ`, the load per unit arrival rate.
    pub rho_at_star: f64,
    #[serde(rename = "L_at_star")]
    pub l_at_star: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

fn default_interval(m: &SxModel) -> (f64, f64) {
    (
        m.eta1_quantile(LOWER_QUANTILE),
        m.eta1_quantile(UPPER_QUANTILE),
    )
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2)
        .all(|w| w[1] <= w[0] + MONOTONE_SLACK * w[0].abs().max(1e-300))
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2)
        .all(|w| w[1] + MONOTONE_SLACK * w[1].abs().max(1e-300) >= w[0])
}

struct RuleSample {
    hazard: f64,
    eta2: f64,
    slope: f64,
}

impl RuleSample {
    fn at(m: &SxModel, t: f64) -> Result<Self> {
        Ok(RuleSample {
            hazard: m.eta1_hazard(t)?,
            eta2: second_visit_mean(m, t)?,
            slope: second_visit_mean_slope(m, t)?,
        })
    }

    /// `η̄₂·h − (1 + η̄₂′)`; the stopping set is where this is ≤ 0.
    fn gap(&self) -> f64 {
        self.eta2 * self.hazard - (1.0 + self.slope)
    }

    fn scale(&self) -> f64 {
        (self.eta2 * self.hazard)
            .abs()
            .max((1.0 + self.slope).abs())
    }
}

/// Smallest `τ` in the search interval with `hazard(τ) ≤ (1 + η̄₂′(τ))/η̄₂(τ)`.
///
/// With atoms in `η₁`, or when the grid shows the monotonicity conditions
/// failing, `ρ(τ)` is minimised directly over the grid and the atoms instead.
/// Without an explicit interval the search runs between the `1e-4` and
/// `1 − 1e-6` quantiles of `η₁`, widening the upper end tenfold once.
pub fn optimal_timeout(m: &SxModel, interval: Option<(f64, f64)>) -> Result<TimeoutSolution> {
    m.validate()?;
    let explicit = interval.is_some();
    let (lo, hi) = interval.unwrap_or_else(|| default_interval(m));
    let lo = if lo > 0.0 { lo } else { hi * 1e-9 };
    if !(hi > lo && hi.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "bad search interval [{lo}, {hi}]"
        )));
    }
    let scale = m.eta1_mean();
    let has_density = m.eta1_has_density();

    if !has_density {
        let diagnostics = Diagnostics {
            interval: (lo, hi),
            grid_points: GRID_POINTS,
            has_density,
            hazard_nonincreasing: false,
            rule_monotone: false,
            flat: false,
        };
        return direct_minimization(m, lo, hi, scale, diagnostics);
    }

    let mut hi = hi;
    let mut widened = false;
    loop {
        let grid = log_grid(lo, hi, GRID_POINTS);
        let samples = grid
            .iter()
            .map(|&t| RuleSample::at(m, t))
            .collect::<Result<Vec<_>>>()?;
        let hazards: Vec<f64> = samples.iter().map(|s| s.hazard).collect();
        let rule: Vec<f64> = samples.iter().map(|s| (1.0 + s.slope) / s.eta2).collect();
        let flat = samples.iter().all(|s| s.gap().abs() <= 1e-9 * s.scale());
        let diagnostics = Diagnostics {
            interval: (lo, hi),
            grid_points: GRID_POINTS,
            has_density,
            hazard_nonincreasing: nonincreasing(&hazards),
            rule_monotone: nondecreasing(&rule),
            flat,
        };
        if flat {
            return finish(m, lo, Method::HazardRule, diagnostics);
        }
        if !diagnostics.assumption_held() {
            return direct_minimization(m, lo, hi, scale, diagnostics);
        }
        match samples.iter().position(|s| s.gap() <= 0.0) {
            Some(0) => return finish(m, lo, Method::HazardRule, diagnostics),
            Some(k) => {
                let tau = bisect_crossing(m, grid[k - 1], grid[k], 1e-8 * scale)?;
                return finish(m, tau, Method::HazardRule, diagnostics);
            }
            None if !explicit && !widened => {
                hi *= 10.0;
                widened = true;
            }
            None => return Err(Error::NoCrossing { lo, hi }),
        }
    }
}

fn bisect_crossing(m: &SxModel, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if RuleSample::at(m, mid)?.gap() <= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(b)
}

fn finish(
    m: &SxModel,
    tau: f64,
    method: Method,
    diagnostics: Diagnostics,
) -> Result<TimeoutSolution> {
    let rho = load_per_rate(m, tau)?;
    Ok(TimeoutSolution {
        tau_star: tau,
        rho_at_star: rho,
        l_at_star: rho / m.eta1_mean(),
        method,
        diagnostics,
    })
}

fn direct_minimization(
    m: &SxModel,
    lo: f64,
    hi: f64,
    scale: f64,
    diagnostics: Diagnostics,
) -> Result<TimeoutSolution> {
    let mut candidates = log_grid(lo, hi, GRID_POINTS);
    let atoms: Vec<f64> = m
        .eta1_atoms()
        .iter()
        .map(|a| a.0)
        .filter(|&a| a >= lo && a <= hi)
        .collect();
    candidates.extend(&atoms);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let values = candidates
        .iter()
        .map(|&t| load_per_rate(m, t))
        .collect::<Result<Vec<_>>>()?;
    let (k, _) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    let mut best = (candidates[k], values[k]);

    let at_atom = atoms.contains(&candidates[k]);
    if !at_atom {
        let a = candidates[k.saturating_sub(1)];
        let b = candidates[(k + 1).min(candidates.len() - 1)];
        let refined = golden_section(|t| load_per_rate(m, t), a, b, 1e-8 * scale)?;
        if refined.1 < best.1 {
            best = refined;
        }
    }
    Ok(TimeoutSolution {
        tau_star: best.0,
        rho_at_star: best.1,
        l_at_star: best.1 / m.eta1_mean(),
        method: Method::DirectMinimization,
        diagnostics,
    })
}

fn golden_section<F: Fn(f64) -> Result<f64>>(
    f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// `L(τ)` on a grid, as used for load-reduction curves.
pub fn load_reduction_curve(m: &SxModel, taus: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mean = m.eta1_mean();
    taus.iter()
        .map(|&t| Ok((t, load_per_rate(m, t)? / mean)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::{DistributionSpec, SxMode};

    #[test]
    fn pareto_crossing() {
        let m = SxModel::unit_size(DistributionSpec::Pareto {
            alpha: 1.5,
            s_m: 1.0,
        });
        let sol = optimal_timeout(&m, None).unwrap();
        assert_eq!(sol.method, Method::HazardRule);
        assert!(sol.diagnostics.assumption_held());
        assert!((sol.tau_star - 4.5).abs() < 1e-6, "{}", sol.tau_star);
        assert!((sol.l_at_star - sol.rho_at_star / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bimodal_direct() {
        let m = SxModel::unit_size(DistributionSpec::bimodal(10.0, 1e3, 0.99));
        let sol = optimal_timeout(&m, None).unwrap();
        assert_eq!(sol.method, Method::DirectMinimization);
        assert_eq!(sol.tau_star, 10.0);
        assert!((sol.l_at_star - 10.199 / 19.9).abs() < 1e-12);
    }

    #[test]
    fn exponential_is_flat() {
        let m = SxModel::unit_size(DistributionSpec::Exponential { rate: 0.25 });
        let sol = optimal_timeout(&m, None).unwrap();
        assert!(sol.diagnostics.flat);
        assert!((sol.l_at_star - 1.0).abs() < 1e-9);
    }

    #[test]
    fn increasing_hazard_falls_back() {
        let m = SxModel::unit_size(DistributionSpec::Erlang { k: 3, rate: 1.0 });
        let sol = optimal_timeout(&m, None).unwrap();
        assert_eq!(sol.method, Method::DirectMinimization);
        assert!(!sol.diagnostics.hazard_nonincreasing);
        assert!(sol.l_at_star >= 1.0 - 1e-9);
    }

    #[test]
    fn no_crossing_in_explicit_interval() {
        let m = SxModel::unit_size(DistributionSpec::Pareto {
            alpha: 1.5,
            s_m: 1.0,
        });
        assert!(matches!(
            optimal_timeout(&m, Some((1.0, 4.0))),
            Err(Error::NoCrossing { .. })
        ));
    }

    #[test]
    fn hyperexponential_crossing() {
        let m = SxModel::new(
            DistributionSpec::hyperexponential(vec![0.99, 0.01], vec![1.0, 1.0 / 99.0]),
            DistributionSpec::Deterministic { v: 1.0 },
            SxMode::Restart,
        );
        let sol = optimal_timeout(&m, None).unwrap();
        assert_eq!(sol.method, Method::HazardRule);
        let grid = log_grid(sol.diagnostics.interval.0, sol.diagnostics.interval.1, 301);
        for t in grid {
            assert!(sol.rho_at_star <= load_per_rate(&m, t).unwrap() * (1.0 + 1e-6));
        }
    }
}
