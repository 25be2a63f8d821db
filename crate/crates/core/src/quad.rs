//! Adaptive Gauss-Kronrod (7/15) quadrature with known breakpoints and
//! semi-infinite ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;
const TAIL_POWER: f64 = 10.0;

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-10,
            abs: 1e-13,
        }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, pieces: &[(f64, f64)], tol: Tolerance) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for &(a, b) in pieces {
        if b <= a {
            continue;
        }
        let (value, err) = gk15(f, a, b);
        total += value;
        total_err += err;
        heap.push(Segment { a, b, value, err });
    }
    let mut segments = heap.len();
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        let Some(worst) = heap.pop() else { break };
        if segments >= MAX_SEGMENTS {
            return Err(Error::Quadrature {
                error_estimate: total_err,
                value: total,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision; accept what we have
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(f, worst.a, mid);
        let (v2, e2) = gk15(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        segments += 1;
    }
    if !total.is_finite() {
        return Err(Error::Quadrature {
            error_estimate: total_err,
            value: total,
        });
    }
    Ok(total)
}

/// Integrates `f` over `[a, b]`, splitting at every breakpoint strictly
/// inside the range. `b` may be `+inf`; the tail beyond the last finite
/// breakpoint (at least 1) is mapped onto `(0, 1]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x.is_finite() && x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut knots = Vec::with_capacity(cuts.len() + 2);
    knots.push(a);
    knots.extend(cuts);
    if b.is_finite() {
        knots.push(b);
    }
    if !b.is_finite() {
        let last = *knots.last().expect("at least the lower limit");
        if last < 1.0 {
            knots.push(1.0);
        }
    }
    let pieces: Vec<(f64, f64)> = knots.windows(2).map(|w| (w[0], w[1])).collect();
    let mut total = adaptive(&f, &pieces, tol)?;
    if !b.is_finite() {
        // x = A u^(-m) turns power tails x^(-p), p > 1, into bounded integrands
        let start = *knots.last().expect("at least the lower limit");
        let mapped = |u: f64| {
            let x = start * u.powf(-TAIL_POWER);
            let v = f(x) * TAIL_POWER * x / u;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        total += adaptive(&mapped, &[(0.0, 1.0)], tol)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0, &[], Tolerance::default()).unwrap();
        assert!((v - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_exponential() {
        let v = integrate(
            |x| (-x).exp(),
            0.0,
            f64::INFINITY,
            &[],
            Tolerance::default(),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn step_function_with_breakpoint() {
        let f = |x: f64| if x < 10.0 { 1.0 } else { 0.01 };
        let v = integrate(f, 0.0, 1000.0, &[10.0], Tolerance::default()).unwrap();
        assert!((v - (10.0 + 9.9)).abs() < 1e-10);
    }

    #[test]
    fn power_tail() {
        // ∫_1^∞ 1.5 x^-2.5 dx = 1
        let v = integrate(
            |x| 1.5 * x.powf(-2.5),
            1.0,
            f64::INFINITY,
            &[],
            Tolerance::default(),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_range() {
        assert_eq!(
            integrate(|_| 1.0, 2.0, 1.0, &[], Tolerance::default()).unwrap(),
            0.0
        );
    }
}
