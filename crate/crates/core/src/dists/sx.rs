//! The slowdown-times-size service model and its conditional moments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::{stream, Purpose};
use super::spec::{bisect_quantile, DistributionSpec};
use crate::error::{Error, Result};
use crate::quad::{integrate, Tolerance};

/// How the second execution relates to the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SxMode {
    /// `η₂ = S₂X` with a fresh slowdown, `X` shared.
    Restart,
    /// `η₂ = η₁ − τμ`: the unfinished work is carried over.
    Resume,
    /// `η₂ = η₁` pathwise.
    Identical,
}

/// Service requirements `η₁ = S₁X` and `η₂` according to `mode`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SxModel {
    #[serde(rename = "S", alias = "slowdown")]
    pub slowdown: DistributionSpec,
    #[serde(rename = "X", alias = "size")]
    pub size: DistributionSpec,
    pub mode: SxMode,
}

/// Work-unit quantities of `η₁` at threshold `c` (service at unit rate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkMoments {
    /// `E[η₁ ∧ c]`
    pub trunc_mean: f64,
    /// `E[(η₁ ∧ c)²]`, possibly infinite when `c = ∞`
    pub trunc_second: f64,
    /// `P(η₁ > c)`
    pub exceed_prob: f64,
    /// `E[(η₁ − c)⁺]`
    pub excess_mean: f64,
    /// `E[η₂ 1{η₁ > c}]`
    pub eta2_exceed: f64,
    /// `E[η₂² 1{η₁ > c}]`, possibly infinite
    pub eta2_sq_exceed: f64,
}

/// Per-queue moments at rate `mu` and timeout `tau`, in time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SxMoments {
    /// `E[η₁/μ ∧ τ]`
    pub mean_truncated: f64,
    /// `P(η₁/μ > τ)`
    pub p_timeout: f64,
    /// `E[η₂/μ | η₁/μ > τ]`, `None` when no job times out
    pub eta2_cond_mean: Option<f64>,
    /// `E[(η₁/μ ∧ τ)²]`
    pub truncated_second: f64,
    /// `E[(η₂/μ)² | η₁/μ > τ]`
    pub eta2_cond_second: Option<f64>,
}

/// Monte-Carlo estimate of [`SxMoments`] with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub n: usize,
    pub mean_truncated: (f64, f64),
    pub p_timeout: (f64, f64),
    pub eta2_cond_mean: Option<(f64, f64)>,
    pub truncated_second: (f64, f64),
    pub eta2_cond_second: Option<(f64, f64)>,
}

fn quad_tol() -> Tolerance {
    Tolerance {
        rel: 1e-11,
        abs: 1e-14,
    }
}

impl SxModel {
    pub fn new(slowdown: DistributionSpec, size: DistributionSpec, mode: SxMode) -> Self {
        SxModel {
            slowdown,
            size,
            mode,
        }
    }

    /// Restart model with a deterministic unit size, `η = S`.
    pub fn unit_size(slowdown: DistributionSpec) -> Self {
        SxModel::new(
            slowdown,
            DistributionSpec::Deterministic { v: 1.0 },
            SxMode::Restart,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.slowdown.validate()?;
        self.size.validate()?;
        if self.eta1_mean() <= 0.0 {
            return Err(Error::InvalidParameters(
                "service requirement has zero mean".into(),
            ));
        }
        Ok(())
    }

    /// `η₂` does not depend on `η₁` (restarts with a deterministic size).
    pub fn eta2_independent(&self) -> bool {
        self.mode == SxMode::Restart && matches!(self.size, DistributionSpec::Deterministic { .. })
    }

    /// Averages `g(x)` over the law of `X`. `extra_breaks` are kinks of `g`.
    fn over_size<G: Fn(f64) -> f64>(&self, g: G, extra_breaks: &[f64]) -> Result<f64> {
        if self.size.is_discrete() {
            return Ok(self.size.atoms().iter().map(|&(x, w)| w * g(x)).sum());
        }
        let (lo, hi) = self.size.support();
        let mut breaks = self.size.breakpoints();
        breaks.extend_from_slice(extra_breaks);
        integrate(
            |x| {
                let w = self.size.pdf(x).unwrap_or(0.0);
                if w == 0.0 {
                    0.0
                } else {
                    w * g(x)
                }
            },
            lo,
            hi,
            &breaks,
            quad_tol(),
        )
    }

    /// Values of `x` where `c / x` hits a kink of the slowdown law.
    fn size_kinks(&self, c: f64) -> Vec<f64> {
        let (slo, shi) = self.slowdown.support();
        let mut pts = self.slowdown.breakpoints();
        pts.push(slo);
        pts.push(shi);
        pts.into_iter()
            .filter(|s| s.is_finite() && *s > 0.0)
            .map(|s| c / s)
            .collect()
    }

    fn eta2_second_infinite(&self) -> bool {
        self.slowdown.second_moment().is_err() || self.size.second_moment().is_err()
    }

    /// Conditional work quantities at threshold `c` (work units).
    pub fn work_moments(&self, c: f64) -> Result<WorkMoments> {
        let s = &self.slowdown;
        let mean_s = s.mean();
        if c == f64::INFINITY {
            return Ok(WorkMoments {
                trunc_mean: self.eta1_mean(),
                trunc_second: self.eta1_second().unwrap_or(f64::INFINITY),
                exceed_prob: 0.0,
                excess_mean: 0.0,
                eta2_exceed: 0.0,
                eta2_sq_exceed: 0.0,
            });
        }
        let c = c.max(0.0);
        let kinks = self.size_kinks(c);
        let trunc_mean = self.over_size(
            |x| {
                if x > 0.0 {
                    x * s.limited_mean(c / x)
                } else {
                    0.0
                }
            },
            &kinks,
        )?;
        let trunc_second = self.over_size(
            |x| {
                if x > 0.0 {
                    x * x * s.limited_second(c / x)
                } else {
                    0.0
                }
            },
            &kinks,
        )?;
        let exceed_prob = self.over_size(|x| if x > 0.0 { s.ccdf(c / x) } else { 0.0 }, &kinks)?;
        let excess_mean = self.over_size(
            |x| {
                if x > 0.0 {
                    x * s.excess_mean(c / x)
                } else {
                    0.0
                }
            },
            &kinks,
        )?;
        let eta2_exceed = match self.mode {
            SxMode::Restart => self.over_size(
                |x| {
                    if x > 0.0 {
                        x * mean_s * s.ccdf(c / x)
                    } else {
                        0.0
                    }
                },
                &kinks,
            )?,
            SxMode::Identical => excess_mean + c * exceed_prob,
            SxMode::Resume => excess_mean,
        };
        let eta2_sq_exceed = if exceed_prob == 0.0 {
            0.0
        } else if self.eta2_second_infinite() {
            f64::INFINITY
        } else {
            let second_s = s.upper_second(0.0);
            self.over_size(
                |x| {
                    if x <= 0.0 {
                        return 0.0;
                    }
                    let a = c / x;
                    match self.mode {
                        SxMode::Restart => {
                            let p = s.ccdf(a);
                            if p == 0.0 {
                                0.0
                            } else {
                                x * x * second_s * p
                            }
                        }
                        SxMode::Identical => x * x * s.upper_second(a),
                        SxMode::Resume => x * x * s.excess_second(a),
                    }
                },
                &kinks,
            )?
        };
        Ok(WorkMoments {
            trunc_mean,
            trunc_second,
            exceed_prob,
            excess_mean,
            eta2_exceed,
            eta2_sq_exceed,
        })
    }

    /// Moments at a queue with rate `mu` and timeout `tau` (`tau` may be `∞`).
    pub fn moments(&self, mu: f64, tau: f64) -> Result<SxMoments> {
        if !(mu > 0.0) || !(tau > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "need mu > 0 and tau > 0, got mu={mu}, tau={tau}"
            )));
        }
        let w = self.work_moments(mu * tau)?;
        let p = w.exceed_prob;
        let cond = |v: f64| if p > 0.0 { Some(v / p) } else { None };
        Ok(SxMoments {
            mean_truncated: w.trunc_mean / mu,
            p_timeout: p,
            eta2_cond_mean: cond(w.eta2_exceed / mu),
            truncated_second: w.trunc_second / (mu * mu),
            eta2_cond_second: cond(w.eta2_sq_exceed / (mu * mu)),
        })
    }

    pub fn eta1_mean(&self) -> f64 {
        self.slowdown.mean() * self.size.mean()
    }

    pub fn eta1_second(&self) -> Result<f64> {
        Ok(self.slowdown.second_moment()? * self.size.second_moment()?)
    }

    /// `P(η₁ > t)`.
    pub fn eta1_ccdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        let s = &self.slowdown;
        self.over_size(
            |x| if x > 0.0 { s.ccdf(t / x) } else { 0.0 },
            &self.size_kinks(t),
        )
        .unwrap_or_else(|e| match e {
            Error::Quadrature { value, .. } => value,
            _ => f64::NAN,
        })
        .clamp(0.0, 1.0)
    }

    /// Whether `η₁` is absolutely continuous.
    pub fn eta1_has_density(&self) -> bool {
        !(self.slowdown.is_discrete() && self.size.is_discrete())
    }

    /// Atoms of `η₁` when both factors are discrete.
    pub fn eta1_atoms(&self) -> Vec<(f64, f64)> {
        if self.eta1_has_density() {
            return Vec::new();
        }
        let mut out: Vec<(f64, f64)> = Vec::new();
        for &(s, ps) in &self.slowdown.atoms() {
            for &(x, px) in &self.size.atoms() {
                let v = s * x;
                match out.iter_mut().find(|(a, _)| *a == v) {
                    Some(entry) => entry.1 += ps * px,
                    None => out.push((v, ps * px)),
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Points where `t ↦ P(η₁ > t)` is not smooth.
    pub fn eta1_breakpoints(&self) -> Vec<f64> {
        let mut sp = self.slowdown.breakpoints();
        let (a, b) = self.slowdown.support();
        sp.extend([a, b]);
        let mut xp = self.size.breakpoints();
        let (c, d) = self.size.support();
        xp.extend([c, d]);
        let mut out: Vec<f64> = sp
            .iter()
            .flat_map(|s| xp.iter().map(move |x| s * x))
            .filter(|v| v.is_finite() && *v > 0.0)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Density of `η₁` at `t`.
    pub fn eta1_pdf(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Ok(0.0);
        }
        let s = &self.slowdown;
        let x_law = &self.size;
        if !self.eta1_has_density() {
            if self.eta1_atoms().iter().any(|&(a, _)| a == t) {
                return Err(Error::AtomicPoint { t });
            }
            return Ok(0.0);
        }
        if !s.is_discrete() {
            if let DistributionSpec::Deterministic { v } = x_law {
                return if *v > 0.0 {
                    Ok(s.pdf(t / v)? / v)
                } else {
                    Ok(0.0)
                };
            }
            return self.over_size(
                |x| {
                    if x > 0.0 {
                        s.pdf(t / x).unwrap_or(0.0) / x
                    } else {
                        0.0
                    }
                },
                &self.size_kinks(t),
            );
        }
        // discrete slowdown, continuous size
        let mut total = 0.0;
        for (sv, w) in s.atoms() {
            if sv > 0.0 {
                total += w * x_law.pdf(t / sv)? / sv;
            }
        }
        Ok(total)
    }

    /// Hazard rate of `η₁`.
    pub fn eta1_hazard(&self, t: f64) -> Result<f64> {
        let survivor = self.eta1_ccdf(t);
        if survivor <= 0.0 {
            return Err(Error::ZeroSurvivorMass { t });
        }
        Ok(self.eta1_pdf(t)? / survivor)
    }

    /// Smallest `t` with `P(η₁ ≤ t) ≥ p`.
    pub fn eta1_quantile(&self, p: f64) -> f64 {
        if let DistributionSpec::Deterministic { v } = self.size {
            return v * self.slowdown.quantile(p);
        }
        bisect_quantile(|t| 1.0 - self.eta1_ccdf(t), p)
    }

    /// Draws `(η₁, η₂)` in work units, the restart copy `η₂` using the
    /// same size and an independent slowdown.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R, c: f64) -> (f64, f64) {
        let x = self.size.sample(rng);
        let s1 = self.slowdown.sample(rng);
        let s2 = self.slowdown.sample(rng);
        let eta1 = s1 * x;
        let eta2 = match self.mode {
            SxMode::Restart => s2 * x,
            SxMode::Identical => eta1,
            SxMode::Resume => (eta1 - c).max(0.0),
        };
        (eta1, eta2)
    }

    /// Plain Monte-Carlo estimate of [`SxModel::moments`], used as an
    /// independent oracle in tests.
    pub fn mc_oracle(&self, mu: f64, tau: f64, n: usize, seed: u64) -> OracleEstimate {
        let c = mu * tau;
        let mut rng = stream(seed, Purpose::Oracle, 0);
        let mut trunc = Acc::default();
        let mut trunc_sq = Acc::default();
        let mut exceed = Acc::default();
        let mut eta2 = Acc::default();
        let mut eta2_sq = Acc::default();
        for _ in 0..n {
            let (e1, e2) = self.sample_pair(&mut rng, c);
            let m = (e1 / mu).min(tau);
            trunc.push(m);
            trunc_sq.push(m * m);
            let timed_out = e1 / mu > tau;
            exceed.push(if timed_out { 1.0 } else { 0.0 });
            if timed_out {
                let v = e2 / mu;
                eta2.push(v);
                eta2_sq.push(v * v);
            }
        }
        OracleEstimate {
            n,
            mean_truncated: trunc.estimate(),
            p_timeout: exceed.estimate(),
            eta2_cond_mean: (eta2.n > 1).then(|| eta2.estimate()),
            truncated_second: trunc_sq.estimate(),
            eta2_cond_second: (eta2_sq.n > 1).then(|| eta2_sq.estimate()),
        }
    }
}

#[derive(Default)]
struct Acc {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Acc {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    /// (mean, standard error)
    fn estimate(&self) -> (f64, f64) {
        if self.n < 2 {
            return (self.mean, f64::INFINITY);
        }
        let var = self.m2 / (self.n - 1) as f64;
        (self.mean, (var / self.n as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bimodal_unit() -> SxModel {
        SxModel::unit_size(DistributionSpec::bimodal(10.0, 1e3, 0.99))
    }

    #[test]
    fn bimodal_restart_at_100() {
        let m = bimodal_unit().moments(1.0, 100.0).unwrap();
        assert!((m.mean_truncated - 10.9).abs() < 1e-12);
        assert!((m.p_timeout - 0.01).abs() < 1e-15);
        assert!((m.eta2_cond_mean.unwrap() - 19.9).abs() < 1e-12);
    }

    #[test]
    fn no_timeout_is_plain_mean() {
        let m = SxModel::new(
            DistributionSpec::Pareto {
                alpha: 2.5,
                s_m: 1.0,
            },
            DistributionSpec::Uniform { a: 0.0, b: 2.0 },
            SxMode::Restart,
        );
        let r = m.moments(1.0, f64::INFINITY).unwrap();
        assert!((r.mean_truncated - m.eta1_mean()).abs() < 1e-12);
        assert_eq!(r.p_timeout, 0.0);
        assert_eq!(r.eta2_cond_mean, None);
    }

    #[test]
    fn identical_deterministic() {
        let m = SxModel::new(
            DistributionSpec::Deterministic { v: 5.0 },
            DistributionSpec::Deterministic { v: 1.0 },
            SxMode::Identical,
        );
        let r = m.moments(1.0, 3.0).unwrap();
        assert_eq!(r.eta2_cond_mean, Some(5.0));
        assert_eq!(r.mean_truncated, 3.0);
    }

    #[test]
    fn resume_carries_residual_work() {
        let m = SxModel::new(
            DistributionSpec::Exponential { rate: 0.5 },
            DistributionSpec::Deterministic { v: 1.0 },
            SxMode::Resume,
        );
        // memoryless: residual work is again exponential with mean 2
        let r = m.moments(1.0, 3.0).unwrap();
        assert!((r.eta2_cond_mean.unwrap() - 2.0).abs() < 1e-12);
        assert!((r.eta2_cond_second.unwrap() - 8.0).abs() < 1e-10);
    }

    #[test]
    fn infinite_second_moment_is_reported() {
        let m = SxModel::unit_size(DistributionSpec::Pareto {
            alpha: 1.5,
            s_m: 1.0,
        });
        let r = m.moments(1.0, 4.0).unwrap();
        assert_eq!(r.eta2_cond_second, Some(f64::INFINITY));
        assert!(r.truncated_second.is_finite());
    }

    #[test]
    fn product_atoms_and_quantiles() {
        let m = SxModel::new(
            DistributionSpec::bimodal(10.0, 1e3, 0.99),
            DistributionSpec::bimodal(1.0, 2.0, 0.5),
            SxMode::Restart,
        );
        let atoms = m.eta1_atoms();
        let expected = [
            (10.0, 0.495),
            (20.0, 0.495),
            (1000.0, 0.005),
            (2000.0, 0.005),
        ];
        assert_eq!(atoms.len(), expected.len());
        for (got, want) in atoms.iter().zip(expected) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() < 1e-15);
        }
        assert!(!m.eta1_has_density());
        assert_eq!(m.eta1_pdf(20.0), Err(Error::AtomicPoint { t: 20.0 }));
        assert_eq!(m.eta1_quantile(0.6), 20.0);
    }

    #[test]
    fn continuous_size_ccdf_and_pdf_consistent() {
        let m = SxModel::new(
            DistributionSpec::bimodal(10.0, 1e3, 0.99),
            DistributionSpec::Uniform { a: 0.0, b: 2.0 },
            SxMode::Restart,
        );
        // P(η₁ > 15) = 0.99 P(X > 1.5) + 0.01 P(X > 0.015)
        let expected = 0.99 * 0.25 + 0.01 * (2.0 - 0.015) / 2.0;
        assert!((m.eta1_ccdf(15.0) - expected).abs() < 1e-12);
        let h = 1e-4;
        let fd = (m.eta1_ccdf(15.0 - h) - m.eta1_ccdf(15.0 + h)) / (2.0 * h);
        assert!((m.eta1_pdf(15.0).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn oracle_standard_error_scales_with_sqrt_n() {
        let m = SxModel::unit_size(DistributionSpec::Exponential { rate: 1.0 });
        let small = m.mc_oracle(1.0, 1.0, 1_000, 11);
        let large = m.mc_oracle(1.0, 1.0, 1_000_000, 11);
        let ratio = small.p_timeout.1 / large.p_timeout.1;
        assert!((ratio / 1000f64.sqrt() - 1.0).abs() < 0.1, "ratio {ratio}");
    }
}
