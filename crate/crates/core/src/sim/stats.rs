use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub const BATCHES: usize = 20;
const DIVERGENCE_T: f64 = 4.0;

/// Time-average number in system against arrival rate times mean response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LittleCheck {
    pub l_measured: f64,
    pub lambda_w: f64,
    pub relative_gap: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub mean: f64,
    pub ci95_halfwidth: f64,
    pub batch_means: Vec<f64>,
    pub trend_t: f64,
    pub diverged: bool,
}

/// Batch means over `values` in arrival order, a t-interval on the overall
/// mean and a regression trend test.
pub fn batch_summary(values: &[f64]) -> BatchSummary {
    let n = values.len();
    if n == 0 {
        return BatchSummary {
            mean: f64::NAN,
            ci95_halfwidth: f64::NAN,
            batch_means: vec![],
            trend_t: 0.0,
            diverged: false,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < BATCHES {
        return BatchSummary {
            mean,
            ci95_halfwidth: f64::INFINITY,
            batch_means: vec![],
            trend_t: 0.0,
            diverged: false,
        };
    }
    let batch_means: Vec<f64> = (0..BATCHES)
        .map(|b| {
            let (lo, hi) = (b * n / BATCHES, (b + 1) * n / BATCHES);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let bm = batch_means.iter().sum::<f64>() / BATCHES as f64;
    let var = batch_means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (BATCHES - 1) as f64)
        .expect("valid dof")
        .inverse_cdf(0.975);
    let ci95_halfwidth = t * (var / BATCHES as f64).sqrt();
    let trend_t = trend_statistic(&batch_means);
    BatchSummary {
        mean,
        ci95_halfwidth,
        batch_means,
        trend_t,
        diverged: trend_t > DIVERGENCE_T,
    }
}

/// t-statistic of the least-squares slope of `y` against its index.
pub fn trend_statistic(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 3 {
        return 0.0;
    }
    let xm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = (0..y.len()).map(|i| (i as f64 - xm).powi(2)).sum();
    let sxy: f64 = y
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 - xm) * (v - ym))
        .sum();
    let slope = sxy / sxx;
    let sse: f64 = y
        .iter()
        .enumerate()
        .map(|(i, v)| (v - ym - slope * (i as f64 - xm)).powi(2))
        .sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    if se == 0.0 {
        return if slope > 0.0 { f64::INFINITY } else { 0.0 };
    }
    slope / se
}

/// Little's law over the window from the first measured arrival to the last arrival.
pub fn little(arrive: &[f64], depart: &[f64], warmup: usize, skip: bool) -> LittleCheck {
    let n = arrive.len();
    if skip || n <= warmup + 1 {
        return LittleCheck {
            l_measured: 0.0,
            lambda_w: 0.0,
            relative_gap: 0.0,
            skipped: skip,
        };
    }
    let (t0, t1) = (arrive[warmup], arrive[n - 1]);
    let len = t1 - t0;
    if !(len > 0.0) {
        return LittleCheck {
            l_measured: 0.0,
            lambda_w: 0.0,
            relative_gap: 0.0,
            skipped: false,
        };
    }
    let area: f64 = arrive
        .iter()
        .zip(depart)
        .map(|(&a, &d)| (d.min(t1) - a.max(t0)).max(0.0))
        .sum();
    let l_measured = area / len;
    let measured = n - warmup;
    let w = (warmup..n).map(|k| depart[k] - arrive[k]).sum::<f64>() / measured as f64;
    let lambda_w = measured as f64 / len * w;
    let relative_gap = if l_measured > 0.0 {
        (l_measured - lambda_w).abs() / l_measured
    } else {
        0.0
    };
    LittleCheck {
        l_measured,
        lambda_w,
        relative_gap,
        skipped: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_series_has_no_trend() {
        let v: Vec<f64> = (0..2000)
            .map(|i| if i % 2 == 0 { 1.0 } else { 3.0 })
            .collect();
        let s = batch_summary(&v);
        assert!((s.mean - 2.0).abs() < 1e-12);
        assert!(!s.diverged);
        let ramp: Vec<f64> = (0..2000)
            .map(|i| i as f64 + if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert!(batch_summary(&ramp).diverged);
    }

    #[test]
    fn little_on_deterministic_queue() {
        let arrive: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let depart: Vec<f64> = arrive.iter().map(|a| a + 0.5).collect();
        let c = little(&arrive, &depart, 100, false);
        assert!(c.relative_gap < 2e-3, "{c:?}");
    }
}
