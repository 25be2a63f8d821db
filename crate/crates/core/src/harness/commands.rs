use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::spec::ExperimentSpec;
use crate::analytic::{
    load_per_rate, load_reduction_curve, mean_field_response, optimal_timeout,
    slowdown_condition_holds, speculation_condition_holds, TimeoutSolution,
};
use crate::dists::{mix_seed, SxModel};
use crate::error::{Error, Result};
use crate::sim::{simulate, RunSpec, Scheme, SimStats};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadReport {
    pub tau: f64,
    pub rho_per_lambda: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// `None` when no job exceeds `τ`.
    pub speculation_helps: Option<bool>,
    pub slowdown_condition: bool,
}

pub fn cmd_load(model: &SxModel, tau: f64) -> Result<LoadReport> {
    let rho = load_per_rate(model, tau)?;
    let speculation_helps = match speculation_condition_holds(model, tau) {
        Ok(v) => Some(v),
        Err(Error::DegenerateConditioning { .. }) => None,
        Err(e) => return Err(e),
    };
    let slowdown_condition = tau.is_finite() && slowdown_condition_holds(model, tau)?;
    Ok(LoadReport {
        tau,
        rho_per_lambda: rho,
        l: rho / model.eta1_mean(),
        speculation_helps,
        slowdown_condition,
    })
}

pub fn cmd_timeout(model: &SxModel, interval: Option<(f64, f64)>) -> Result<TimeoutSolution> {
    optimal_timeout(model, interval)
}

pub fn cmd_lcurve(model: &SxModel, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    load_reduction_curve(model, grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub load: f64,
    pub lambda: f64,
    pub tau: f64,
    pub mean_response: f64,
    pub ci95: f64,
    pub diverged: bool,
    pub replications: usize,
    pub seed: u64,
}

/// Seed for one `(scheme, load)` point; replication `r` uses `mix_seed(&[row, r])`.
pub fn row_seed(base: u64, scheme: Scheme, load: f64) -> u64 {
    let name = scheme
        .to_string()
        .bytes()
        .fold(0u64, |h, b| h.wrapping_mul(0x100_0000_01b3) ^ b as u64);
    mix_seed(&[base, name, load.to_bits()])
}

pub fn rep_seed(row: u64, rep: usize) -> u64 {
    mix_seed(&[row, rep as u64])
}

struct Point {
    scheme: Scheme,
    load: f64,
    seed: u64,
}

/// Mean over replications with a t-interval across them; a single
/// replication falls back to its batch-means interval.
fn aggregate(runs: &[SimStats]) -> (f64, f64, bool) {
    let k = runs.len();
    let mean = runs.iter().map(|s| s.mean_response).sum::<f64>() / k as f64;
    let diverged = 2 * runs.iter().filter(|s| s.diverged).count() > k;
    if k == 1 {
        return (mean, runs[0].ci95_halfwidth, diverged);
    }
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let var = runs
        .iter()
        .map(|s| (s.mean_response - mean).powi(2))
        .sum::<f64>()
        / (k - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (k - 1) as f64)
        .expect("dof > 0")
        .inverse_cdf(0.975);
    (mean, t * (var / k as f64).sqrt(), diverged)
}

fn run_points(
    spec: &ExperimentSpec,
    points: Vec<Point>,
    tau: f64,
) -> Result<Vec<(Point, Vec<SimStats>)>> {
    if spec.n_jobs == 0 {
        return Ok(Vec::new());
    }
    let warmup = crate::sim::default_warmup(spec.n_jobs);
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.replications).map(move |r| (p, r)))
        .collect();
    let results: Vec<Result<SimStats>> = tasks
        .par_iter()
        .map(|&(p, r)| {
            let pt = &points[p];
            let cfg = spec.network(pt.load, tau);
            let run = RunSpec {
                n_jobs: spec.n_jobs,
                warmup,
                seed: rep_seed(pt.seed, r),
                trace: false,
            };
            simulate(&cfg, pt.scheme, spec.discipline, run).map(|o| o.stats)
        })
        .collect();
    let mut grouped: Vec<Vec<SimStats>> = (0..points.len()).map(|_| Vec::new()).collect();
    for ((p, _), res) in tasks.iter().zip(results) {
        grouped[*p].push(res?);
    }
    Ok(points.into_iter().zip(grouped).collect())
}

pub fn cmd_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let tau = spec.tau.resolve(&spec.model)?;
    let mut schemes = spec.schemes.clone();
    schemes.sort();
    schemes.dedup();
    let mut loads = spec.lambda_grid.clone();
    loads.sort_by(f64::total_cmp);
    let points: Vec<Point> = schemes
        .iter()
        .flat_map(|&scheme| {
            loads.iter().map(move |&load| Point {
                scheme,
                load,
                seed: row_seed(spec.seed, scheme, load),
            })
        })
        .collect();
    let mean = spec.model.eta1_mean();
    Ok(run_points(spec, points, tau)?
        .into_iter()
        .map(|(pt, runs)| {
            let (mean_response, ci95, diverged) = aggregate(&runs);
            SweepRow {
                scheme: pt.scheme,
                load: pt.load,
                lambda: pt.load / mean,
                tau,
                mean_response,
                ci95,
                diverged,
                replications: runs.len(),
                seed: pt.seed,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureRow {
    pub load: f64,
    pub tau: f64,
    pub sim_mean: f64,
    pub sim_ci95: f64,
    /// `None` when the formula's load is at least one.
    pub formula_mean: Option<f64>,
    pub relative_gap: Option<f64>,
    pub seed: u64,
}

/// Simulated SLB response against the mean-field estimate at each load.
pub fn cmd_conjecture(spec: &ExperimentSpec) -> Result<Vec<ConjectureRow>> {
    spec.validate()?;
    let tau = spec.tau.resolve(&spec.model)?;
    let mut loads = spec.lambda_grid.clone();
    loads.sort_by(f64::total_cmp);
    let mean = spec.model.eta1_mean();
    let points: Vec<Point> = loads
        .iter()
        .map(|&load| Point {
            scheme: Scheme::Slb,
            load,
            seed: row_seed(spec.seed, Scheme::Slb, load),
        })
        .collect();
    run_points(spec, points, tau)?
        .into_iter()
        .map(|(pt, runs)| {
            let (sim_mean, sim_ci95, _) = aggregate(&runs);
            let formula_mean = match mean_field_response(pt.load / mean, &spec.model, tau) {
                Ok(r) => Some(r.r_infinity),
                Err(Error::Unstable { .. }) => None,
                Err(e) => return Err(e),
            };
            let relative_gap = formula_mean.map(|f| (sim_mean - f).abs() / f);
            Ok(ConjectureRow {
                load: pt.load,
                tau,
                sim_mean,
                sim_ci95,
                formula_mean,
                relative_gap,
                seed: pt.seed,
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>, missing: &str) -> String {
    v.map_or(missing.to_string(), |x| x.to_string())
}

pub const LOAD_HEADER: [&str; 5] = [
    "tau",
    "rho_per_lambda",
    "L",
    "speculation_helps",
    "slowdown_condition",
];
pub const TIMEOUT_HEADER: [&str; 8] = [
    "tau_star",
    "rho_at_star",
    "L_at_star",
    "method",
    "assumption_held",
    "flat",
    "interval_lo",
    "interval_hi",
];
pub const LCURVE_HEADER: [&str; 2] = ["tau", "L"];
pub const SWEEP_HEADER: [&str; 9] = [
    "scheme",
    "load",
    "lambda",
    "tau",
    "mean_response",
    "ci95",
    "diverged",
    "replications",
    "seed",
];
pub const CONJECTURE_HEADER: [&str; 7] = [
    "load",
    "tau",
    "sim_mean",
    "sim_ci95",
    "formula_mean",
    "relative_gap",
    "seed",
];

pub fn write_load<W: Write>(out: W, r: &LoadReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOAD_HEADER)?;
    let verdict = match r.speculation_helps {
        Some(v) => v.to_string(),
        None => "degenerate".into(),
    };
    w.write_record([
        r.tau.to_string(),
        r.rho_per_lambda.to_string(),
        r.l.to_string(),
        verdict,
        r.slowdown_condition.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_timeout<W: Write>(out: W, s: &TimeoutSolution) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIMEOUT_HEADER)?;
    let d = &s.diagnostics;
    w.write_record([
        s.tau_star.to_string(),
        s.rho_at_star.to_string(),
        s.l_at_star.to_string(),
        s.method.to_string(),
        d.assumption_held().to_string(),
        d.flat.to_string(),
        d.interval.0.to_string(),
        d.interval.1.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_lcurve<W: Write>(out: W, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LCURVE_HEADER)?;
    for (t, l) in rows {
        w.write_record([t.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.scheme.to_string(),
            r.load.to_string(),
            r.lambda.to_string(),
            r.tau.to_string(),
            r.mean_response.to_string(),
            r.ci95.to_string(),
            r.diverged.to_string(),
            r.replications.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_conjecture<W: Write>(out: W, rows: &[ConjectureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONJECTURE_HEADER)?;
    for r in rows {
        w.write_record([
            r.load.to_string(),
            r.tau.to_string(),
            r.sim_mean.to_string(),
            r.sim_ci95.to_string(),
            fmt_opt(r.formula_mean, "unstable"),
            fmt_opt(r.relative_gap, ""),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
