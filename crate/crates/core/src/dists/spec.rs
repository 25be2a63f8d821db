//! Parametric distributions with closed-form tail quantities.
//!
//! Every quantity the load formulas need is derived from four primitives
//! evaluated at a threshold `a`: the survivor function `P(D > a)` and the
//! upper partial moments `E[D 1{D > a}]`, `E[D^2 1{D > a}]`, plus the
//! stop-loss `E[(D - a)^+]`. All variants have closed forms for these.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Pareto as ParetoLaw};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;

/// A parametric service or slowdown distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Deterministic {
        v: f64,
    },
    Exponential {
        rate: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    /// `s_m` with probability `p`, `s_M` otherwise.
    Bimodal {
        s_m: f64,
        #[serde(rename = "s_M")]
        s_big: f64,
        p: f64,
    },
    #[serde(rename = "hyperexponential")]
    HyperExponential {
        weights: Vec<f64>,
        rates: Vec<f64>,
    },
    Pareto {
        alpha: f64,
        s_m: f64,
    },
    /// Pareto density `∝ t^(-alpha-1)` restricted to `[s_m, b]`.
    TruncatedPareto {
        alpha: f64,
        s_m: f64,
        b: f64,
    },
    Erlang {
        k: u32,
        rate: f64,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!(
            "{name} must be nonnegative and finite, got {v}"
        )))
    }
}

fn probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

/// Regularized upper incomplete gamma `Q(k, x)` for integer `k`,
/// i.e. the survivor function of Erlang(k, 1) at `x`.
fn erlang_q(k: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..k {
        term *= x / n as f64;
        sum += term;
    }
    (-x).exp() * sum
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

impl DistributionSpec {
    pub fn bimodal(s_m: f64, s_big: f64, p: f64) -> Self {
        DistributionSpec::Bimodal { s_m, s_big, p }
    }

    pub fn hyperexponential(weights: Vec<f64>, rates: Vec<f64>) -> Self {
        DistributionSpec::HyperExponential { weights, rates }
    }

    /// Checks the parameter invariants.
    pub fn validate(&self) -> Result<()> {
        use DistributionSpec::*;
        match self {
            Deterministic { v } => nonnegative("v", *v),
            Exponential { rate } => positive("rate", *rate),
            Uniform { a, b } => {
                nonnegative("a", *a)?;
                nonnegative("b", *b)?;
                if b <= a {
                    return Err(Error::InvalidParameters(format!(
                        "uniform needs a < b, got [{a}, {b}]"
                    )));
                }
                Ok(())
            }
            Bimodal { s_m, s_big, p } => {
                nonnegative("s_m", *s_m)?;
                nonnegative("s_M", *s_big)?;
                probability("p", *p)?;
                if s_big <= s_m {
                    return Err(Error::InvalidParameters(format!(
                        "bimodal needs s_M > s_m, got s_m={s_m}, s_M={s_big}"
                    )));
                }
                Ok(())
            }
            HyperExponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::InvalidParameters(
                        "hyperexponential needs equally many (>0) weights and rates".into(),
                    ));
                }
                for &w in weights {
                    probability("weight", w)?;
                }
                for &r in rates {
                    positive("rate", r)?;
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidParameters(format!(
                        "weights sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
            Pareto { alpha, s_m } => {
                positive("s_m", *s_m)?;
                positive("alpha", *alpha)?;
                if *alpha <= 1.0 {
                    return Err(Error::InvalidParameters(format!(
                        "pareto needs alpha > 1 for a finite mean, got {alpha}"
                    )));
                }
                Ok(())
            }
            TruncatedPareto { alpha, s_m, b } => {
                positive("s_m", *s_m)?;
                positive("alpha", *alpha)?;
                positive("b", *b)?;
                if b <= s_m {
                    return Err(Error::InvalidParameters(format!(
                        "truncated pareto needs b > s_m, got s_m={s_m}, b={b}"
                    )));
                }
                Ok(())
            }
            Erlang { k, rate } => {
                positive("rate", *rate)?;
                if *k == 0 {
                    return Err(Error::InvalidParameters("erlang needs k >= 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Atoms as `(value, mass)` pairs; empty for absolutely continuous laws.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            DistributionSpec::Deterministic { v } => vec![(*v, 1.0)],
            DistributionSpec::Bimodal { s_m, s_big, p } => {
                let mut out = Vec::with_capacity(2);
                if *p > 0.0 {
                    out.push((*s_m, *p));
                }
                if *p < 1.0 {
                    out.push((*s_big, 1.0 - p));
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// True when the law is a finite mixture of atoms.
    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            DistributionSpec::Deterministic { .. } | DistributionSpec::Bimodal { .. }
        )
    }

    /// Points where the survivor function is not smooth (atoms and support ends).
    pub fn breakpoints(&self) -> Vec<f64> {
        use DistributionSpec::*;
        match self {
            Deterministic { v } => vec![*v],
            Bimodal { s_m, s_big, .. } => vec![*s_m, *s_big],
            Uniform { a, b } => vec![*a, *b],
            Pareto { s_m, .. } => vec![*s_m],
            TruncatedPareto { s_m, b, .. } => vec![*s_m, *b],
            Exponential { .. } | HyperExponential { .. } | Erlang { .. } => Vec::new(),
        }
    }

    /// Support as `(lower, upper)`; `upper` may be infinite.
    pub fn support(&self) -> (f64, f64) {
        use DistributionSpec::*;
        match self {
            Deterministic { v } => (*v, *v),
            Bimodal { s_m, s_big, p } => {
                if *p >= 1.0 {
                    (*s_m, *s_m)
                } else if *p <= 0.0 {
                    (*s_big, *s_big)
                } else {
                    (*s_m, *s_big)
                }
            }
            Uniform { a, b } => (*a, *b),
            Pareto { s_m, .. } => (*s_m, f64::INFINITY),
            TruncatedPareto { s_m, b, .. } => (*s_m, *b),
            Exponential { .. } | HyperExponential { .. } | Erlang { .. } => (0.0, f64::INFINITY),
        }
    }

    /// `P(D > t)`, right-continuous, strict inequality at atoms.
    pub fn ccdf(&self, t: f64) -> f64 {
        use DistributionSpec::*;
        if t < 0.0 {
            return 1.0;
        }
        match self {
            Deterministic { v } => {
                if *v > t {
                    1.0
                } else {
                    0.0
                }
            }
            Bimodal { s_m, s_big, p } => {
                let mut s = 0.0;
                if *s_m > t {
                    s += p;
                }
                if *s_big > t {
                    s += 1.0 - p;
                }
                s
            }
            Exponential { rate } => (-rate * t).exp(),
            HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * (-r * t).exp())
                .sum(),
            Uniform { a, b } => {
                if t < *a {
                    1.0
                } else if t >= *b {
                    0.0
                } else {
                    (b - t) / (b - a)
                }
            }
            Pareto { alpha, s_m } => {
                if t < *s_m {
                    1.0
                } else {
                    (s_m / t).powf(*alpha)
                }
            }
            TruncatedPareto { alpha, s_m, b } => {
                if t < *s_m {
                    1.0
                } else if t >= *b {
                    0.0
                } else {
                    let tail = (s_m / b).powf(*alpha);
                    (((s_m / t).powf(*alpha) - tail) / (1.0 - tail)).max(0.0)
                }
            }
            Erlang { k, rate } => erlang_q(*k, rate * t),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.ccdf(t)
    }

    /// Density at `t`; fails at atoms.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        use DistributionSpec::*;
        if t < 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            Deterministic { .. } | Bimodal { .. } => {
                if self.atoms().iter().any(|&(x, _)| x == t) {
                    return Err(Error::AtomicPoint { t });
                }
                0.0
            }
            Exponential { rate } => rate * (-rate * t).exp(),
            HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * r * (-r * t).exp())
                .sum(),
            Uniform { a, b } => {
                if t >= *a && t <= *b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Pareto { alpha, s_m } => {
                if t < *s_m {
                    0.0
                } else {
                    alpha * s_m.powf(*alpha) * t.powf(-alpha - 1.0)
                }
            }
            TruncatedPareto { alpha, s_m, b } => {
                if t < *s_m || t > *b {
                    0.0
                } else {
                    let norm = 1.0 - (s_m / b).powf(*alpha);
                    alpha * s_m.powf(*alpha) * t.powf(-alpha - 1.0) / norm
                }
            }
            Erlang { k, rate } => {
                if t == 0.0 {
                    if *k == 1 {
                        *rate
                    } else {
                        0.0
                    }
                } else {
                    let kf = *k as f64;
                    (kf * rate.ln() + (kf - 1.0) * t.ln() - rate * t - ln_factorial(k - 1)).exp()
                }
            }
        })
    }

    /// Hazard rate `f(t) / P(D > t)`.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        match self {
            DistributionSpec::Exponential { rate } if t >= 0.0 => return Ok(*rate),
            DistributionSpec::HyperExponential { weights, rates } if t >= 0.0 => {
                // r_min + Σ wᵢ(rᵢ − r_min)e^{−(rᵢ−r_min)t} / Σ wᵢe^{−(rᵢ−r_min)t}
                let r_min = rates.iter().copied().fold(f64::INFINITY, f64::min);
                let (mut num, mut den) = (0.0, 0.0);
                for (w, r) in weights.iter().zip(rates) {
                    let e = w * (-(r - r_min) * t).exp();
                    num += (r - r_min) * e;
                    den += e;
                }
                return Ok(r_min + num / den);
            }
            _ => {}
        }
        let density = self.pdf(t)?;
        let survivor = self.ccdf(t);
        if survivor <= 0.0 {
            return Err(Error::ZeroSurvivorMass { t });
        }
        Ok(density / survivor)
    }

    pub fn mean(&self) -> f64 {
        self.upper_first(0.0)
    }

    /// `E[D^2]`; infinite for untruncated Pareto with `alpha <= 2`.
    pub fn second_moment(&self) -> Result<f64> {
        let m = self.upper_second(0.0);
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::InfiniteMoment)
        }
    }

    /// `E[D 1{D > a}]`.
    pub fn upper_first(&self, a: f64) -> f64 {
        use DistributionSpec::*;
        let a = a.max(0.0);
        match self {
            Deterministic { .. } | Bimodal { .. } => self
                .atoms()
                .iter()
                .filter(|&&(x, _)| x > a)
                .map(|&(x, m)| x * m)
                .sum(),
            Exponential { rate } => (-rate * a).exp() * (a + 1.0 / rate),
            HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * (-r * a).exp() * (a + 1.0 / r))
                .sum(),
            Uniform { a: lo, b: hi } => {
                let from = a.max(*lo);
                if from >= *hi {
                    0.0
                } else {
                    (hi * hi - from * from) / (2.0 * (hi - lo))
                }
            }
            Pareto { alpha, s_m } => {
                let from = a.max(*s_m);
                alpha * s_m.powf(*alpha) * from.powf(1.0 - alpha) / (alpha - 1.0)
            }
            TruncatedPareto { alpha, s_m, b } => {
                let from = a.max(*s_m);
                if from >= *b {
                    return 0.0;
                }
                let norm = alpha * s_m.powf(*alpha) / (1.0 - (s_m / b).powf(*alpha));
                let integral = if (*alpha - 1.0).abs() < 1e-12 {
                    (b / from).ln()
                } else {
                    (from.powf(1.0 - alpha) - b.powf(1.0 - alpha)) / (alpha - 1.0)
                };
                norm * integral
            }
            Erlang { k, rate } => (*k as f64) / rate * erlang_q(k + 1, rate * a),
        }
    }

    /// `E[D^2 1{D > a}]`; may be `+inf`.
    pub fn upper_second(&self, a: f64) -> f64 {
        use DistributionSpec::*;
        let a = a.max(0.0);
        match self {
            Deterministic { .. } | Bimodal { .. } => self
                .atoms()
                .iter()
                .filter(|&&(x, _)| x > a)
                .map(|&(x, m)| x * x * m)
                .sum(),
            Exponential { rate } => {
                (-rate * a).exp() * (a * a + 2.0 * a / rate + 2.0 / (rate * rate))
            }
            HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * (-r * a).exp() * (a * a + 2.0 * a / r + 2.0 / (r * r)))
                .sum(),
            Uniform { a: lo, b: hi } => {
                let from = a.max(*lo);
                if from >= *hi {
                    0.0
                } else {
                    (hi.powi(3) - from.powi(3)) / (3.0 * (hi - lo))
                }
            }
            Pareto { alpha, s_m } => {
                if *alpha <= 2.0 {
                    return f64::INFINITY;
                }
                let from = a.max(*s_m);
                alpha * s_m.powf(*alpha) * from.powf(2.0 - alpha) / (alpha - 2.0)
            }
            TruncatedPareto { alpha, s_m, b } => {
                let from = a.max(*s_m);
                if from >= *b {
                    return 0.0;
                }
                let norm = alpha * s_m.powf(*alpha) / (1.0 - (s_m / b).powf(*alpha));
                let integral = if (*alpha - 2.0).abs() < 1e-12 {
                    (b / from).ln()
                } else {
                    (b.powf(2.0 - alpha) - from.powf(2.0 - alpha)) / (2.0 - alpha)
                };
                norm * integral
            }
            Erlang { k, rate } => {
                let kf = *k as f64;
                kf * (kf + 1.0) / (rate * rate) * erlang_q(k + 2, rate * a)
            }
        }
    }

    /// Stop-loss `E[(D - a)^+]`.
    pub fn excess_mean(&self, a: f64) -> f64 {
        use DistributionSpec::*;
        if a <= 0.0 {
            return self.mean() - a.max(0.0);
        }
        match self {
            Exponential { rate } => (-rate * a).exp() / rate,
            HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * (-r * a).exp() / r)
                .sum(),
            Pareto { alpha, s_m } if a >= *s_m => a * (s_m / a).powf(*alpha) / (alpha - 1.0),
            Uniform { a: lo, b: hi } if a >= *lo => {
                if a >= *hi {
                    0.0
                } else {
                    (hi - a) * (hi - a) / (2.0 * (hi - lo))
                }
            }
            _ => (self.upper_first(a) - a * self.ccdf(a)).max(0.0),
        }
    }

    /// `E[D ∧ a]`.
    pub fn limited_mean(&self, a: f64) -> f64 {
        if a == f64::INFINITY {
            return self.mean();
        }
        (self.mean() - self.excess_mean(a)).max(0.0)
    }

    /// `E[(D ∧ a)^2]`.
    pub fn limited_second(&self, a: f64) -> f64 {
        if a == f64::INFINITY {
            return self.upper_second(0.0);
        }
        let total = self.upper_second(0.0);
        let lower = if total.is_finite() {
            total - self.upper_second(a)
        } else {
            self.lower_second_direct(a)
        };
        lower.max(0.0) + a * a * self.ccdf(a)
    }

    /// `E[((D - a)^+)^2]`; may be `+inf`.
    pub fn excess_second(&self, a: f64) -> f64 {
        let u2 = self.upper_second(a);
        if !u2.is_finite() {
            return f64::INFINITY;
        }
        let p = self.ccdf(a);
        if p == 0.0 {
            return 0.0;
        }
        match self {
            DistributionSpec::Exponential { rate } => 2.0 * (-rate * a).exp() / (rate * rate),
            DistributionSpec::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| 2.0 * w * (-r * a).exp() / (r * r))
                .sum(),
            _ => (u2 - 2.0 * a * self.upper_first(a) + a * a * p).max(0.0),
        }
    }

    /// `E[D^2 1{D <= a}]` for laws whose full second moment diverges.
    fn lower_second_direct(&self, a: f64) -> f64 {
        match self {
            DistributionSpec::Pareto { alpha, s_m } => {
                if a <= *s_m {
                    return 0.0;
                }
                let c = alpha * s_m.powf(*alpha);
                if (*alpha - 2.0).abs() < 1e-12 {
                    c * (a / s_m).ln()
                } else {
                    c * (a.powf(2.0 - alpha) - s_m.powf(2.0 - alpha)) / (2.0 - alpha)
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// Smallest `t` with `P(D <= t) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        use DistributionSpec::*;
        let p = p.clamp(0.0, 1.0);
        match self {
            Deterministic { v } => *v,
            Bimodal { s_m, s_big, p: q } => {
                if p <= *q {
                    *s_m
                } else {
                    *s_big
                }
            }
            Exponential { rate } => -(-p).ln_1p() / rate,
            Uniform { a, b } => a + p * (b - a),
            Pareto { alpha, s_m } => {
                if p >= 1.0 {
                    f64::INFINITY
                } else {
                    s_m * (1.0 - p).powf(-1.0 / alpha)
                }
            }
            TruncatedPareto { alpha, s_m, b } => {
                let span = 1.0 - (s_m / b).powf(*alpha);
                s_m * (1.0 - p * span).powf(-1.0 / alpha)
            }
            HyperExponential { .. } | Erlang { .. } => bisect_quantile(|t| self.cdf(t), p),
        }
    }

    /// Draws one variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use DistributionSpec::*;
        match self {
            Deterministic { v } => *v,
            Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            Uniform { a, b } => rng.random_range(*a..*b),
            Bimodal { s_m, s_big, p } => {
                if rng.random::<f64>() < *p {
                    *s_m
                } else {
                    *s_big
                }
            }
            HyperExponential { weights, rates } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut phase = rates.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        phase = i;
                        break;
                    }
                }
                Exp::new(rates[phase]).expect("validated rate").sample(rng)
            }
            Pareto { alpha, s_m } => ParetoLaw::new(*s_m, *alpha)
                .expect("validated pareto")
                .sample(rng),
            TruncatedPareto { alpha, s_m, b } => {
                let u: f64 = rng.random();
                let span = 1.0 - (s_m / b).powf(*alpha);
                (s_m * (1.0 - u * span).powf(-1.0 / alpha)).min(*b)
            }
            Erlang { k, rate } => Gamma::new(*k as f64, 1.0 / rate)
                .expect("validated erlang")
                .sample(rng),
        }
    }
}

/// Generalized inverse of a continuous nondecreasing `cdf` by bisection.
pub(crate) fn bisect_quantile<F: Fn(f64) -> f64>(cdf: F, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    let mut guard = 0;
    while cdf(hi) < p {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) >= p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
