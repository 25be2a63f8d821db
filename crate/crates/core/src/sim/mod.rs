//! Discrete-event simulation of speculative load balancing and of the
//! replication schemes it is compared against.

mod engine;
mod scheme;
mod stats;

use std::io::Write;

use serde::Serialize;

pub use engine::{Arrival, Engine, PoissonSource, RunRecord};
pub use scheme::{Discipline, Scheme};
pub use stats::{batch_summary, little, trend_statistic, BatchSummary, LittleCheck, BATCHES};

use crate::analytic::NetworkConfig;
use crate::error::{Error, Result};
use crate::fluid::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    TimedOut,
    Cancelled,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::TimedOut => "timed_out",
            Outcome::Cancelled => "cancelled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Visit {
    pub queue: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub outcome: Outcome,
}

/// A traced job. Replicas cancelled before starting appear as zero-length visits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Job {
    pub id: usize,
    pub t_arrive: f64,
    pub x: f64,
    pub s1: f64,
    pub s2: f64,
    pub class: ClassId,
    pub visits: Vec<Visit>,
    pub t_depart: f64,
}

impl Job {
    pub fn response(&self) -> f64 {
        self.t_depart - self.t_arrive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ClassCounts {
    pub completed_first: u64,
    pub timed_out: u64,
    pub replicas_dispatched: u64,
    pub replicas_cancelled: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub scheme: Scheme,
    pub seed: u64,
    pub jobs_arrived: usize,
    pub jobs_completed: usize,
    pub in_system_at_end: usize,
    pub measured_jobs: usize,
    pub mean_response: f64,
    pub ci95_halfwidth: f64,
    pub batch_means: Vec<f64>,
    /// Mean service received along the completing path.
    pub mean_service: f64,
    pub per_class_counts: ClassCounts,
    pub timeout_fraction: f64,
    pub messages_per_job: f64,
    pub max_total_queue: usize,
    pub trend_t: f64,
    pub diverged: bool,
    pub little: LittleCheck,
    /// Out-of-order events plus idle servers with waiting work; always 0.
    pub invariant_violations: u64,
    pub end_time: f64,
}

/// Run length and seeding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub n_jobs: usize,
    pub warmup: usize,
    pub seed: u64,
    pub trace: bool,
}

impl RunSpec {
    /// Warmup of 10% of the jobs.
    pub fn new(n_jobs: usize, seed: u64) -> Self {
        RunSpec {
            n_jobs,
            warmup: default_warmup(n_jobs),
            seed,
            trace: false,
        }
    }
}

pub fn default_warmup(n_jobs: usize) -> usize {
    n_jobs / 10
}

pub struct SimOutput {
    pub stats: SimStats,
    pub jobs: Option<Vec<Job>>,
}

fn check(cfg: &NetworkConfig, scheme: &Scheme, n_jobs: usize, warmup: usize) -> Result<()> {
    cfg.validate()?;
    scheme.validate(cfg.n)?;
    if n_jobs == 0 || warmup >= n_jobs {
        return Err(Error::InvalidParameters(format!(
            "need n_jobs > warmup >= 0, got {n_jobs} and {warmup}"
        )));
    }
    Ok(())
}

/// Simulates `spec.n_jobs` Poisson arrivals and drains the network.
pub fn simulate(
    cfg: &NetworkConfig,
    scheme: Scheme,
    discipline: Discipline,
    spec: RunSpec,
) -> Result<SimOutput> {
    check(cfg, &scheme, spec.n_jobs, spec.warmup)?;
    let source = PoissonSource::new(cfg, &scheme, spec.n_jobs, spec.seed);
    simulate_arrivals(cfg, scheme, discipline, spec, source)
}

/// Simulates a given arrival sequence; `spec.n_jobs` is ignored.
pub fn simulate_arrivals<I: Iterator<Item = Arrival>>(
    cfg: &NetworkConfig,
    scheme: Scheme,
    discipline: Discipline,
    spec: RunSpec,
    arrivals: I,
) -> Result<SimOutput> {
    cfg.validate()?;
    scheme.validate(cfg.n)?;
    let mut record = Engine::new(cfg, scheme, discipline, spec.seed, spec.trace).run(arrivals);
    let jobs = record.jobs.take();
    Ok(SimOutput {
        stats: summarize(scheme, spec, &record),
        jobs,
    })
}

fn summarize(scheme: Scheme, spec: RunSpec, rec: &RunRecord) -> SimStats {
    let n = rec.arrive.len();
    let warmup = spec.warmup.min(n.saturating_sub(1));
    let completed = rec.depart.iter().filter(|d| !d.is_nan()).count();
    let responses: Vec<f64> = (warmup..n).map(|k| rec.depart[k] - rec.arrive[k]).collect();
    let measured = responses.len().max(1) as f64;
    let summary = batch_summary(&responses);
    let timeouts = rec.timed_out[warmup..].iter().filter(|&&t| t).count();
    let messages: u64 = rec.messages[warmup..].iter().map(|&m| m as u64).sum();
    let service: f64 = rec.service[warmup..].iter().sum();
    SimStats {
        scheme,
        seed: spec.seed,
        jobs_arrived: n,
        jobs_completed: completed,
        in_system_at_end: n - completed,
        measured_jobs: responses.len(),
        mean_response: summary.mean,
        ci95_halfwidth: summary.ci95_halfwidth,
        batch_means: summary.batch_means,
        mean_service: service / measured,
        per_class_counts: ClassCounts {
            completed_first: (n - rec.timed_out.iter().filter(|&&t| t).count()) as u64,
            timed_out: rec.timed_out.iter().filter(|&&t| t).count() as u64,
            replicas_dispatched: rec.replicas_dispatched,
            replicas_cancelled: rec.replicas_cancelled,
        },
        timeout_fraction: timeouts as f64 / measured,
        messages_per_job: messages as f64 / measured,
        max_total_queue: rec.max_in_system,
        trend_t: summary.trend_t,
        diverged: summary.diverged,
        little: little(&rec.arrive, &rec.depart, warmup, summary.diverged),
        invariant_violations: rec.violations,
        end_time: rec.end_time,
    }
}

pub fn run(
    cfg: &NetworkConfig,
    scheme: Scheme,
    discipline: Discipline,
    n_jobs: usize,
    warmup: usize,
    seed: u64,
) -> Result<SimStats> {
    check(cfg, &scheme, n_jobs, warmup)?;
    Ok(simulate(
        cfg,
        scheme,
        discipline,
        RunSpec {
            n_jobs,
            warmup,
            seed,
            trace: false,
        },
    )?
    .stats)
}

pub fn run_coc(
    cfg: &NetworkConfig,
    d: usize,
    n_jobs: usize,
    warmup: usize,
    seed: u64,
) -> Result<SimStats> {
    run(cfg, Scheme::CoC(d), Discipline::Fcfs, n_jobs, warmup, seed)
}

pub fn run_cos(
    cfg: &NetworkConfig,
    d: usize,
    n_jobs: usize,
    warmup: usize,
    seed: u64,
) -> Result<SimStats> {
    run(cfg, Scheme::CoS(d), Discipline::Fcfs, n_jobs, warmup, seed)
}

pub fn run_riq(
    cfg: &NetworkConfig,
    d: usize,
    n_jobs: usize,
    warmup: usize,
    seed: u64,
) -> Result<SimStats> {
    run(cfg, Scheme::Riq(d), Discipline::Fcfs, n_jobs, warmup, seed)
}

/// Control messages per job: dispatches plus re-routes or cancellations.
pub fn message_overhead(stats: &SimStats) -> f64 {
    stats.messages_per_job
}

/// Little's law on a job trace, skipping the first `warmup` jobs.
pub fn littles_law_check(jobs: &[Job], warmup: usize, diverged: bool) -> LittleCheck {
    let arrive: Vec<f64> = jobs.iter().map(|j| j.t_arrive).collect();
    let depart: Vec<f64> = jobs.iter().map(|j| j.t_depart).collect();
    little(
        &arrive,
        &depart,
        warmup.min(jobs.len().saturating_sub(1)),
        diverged,
    )
}

/// Writes `id,t_arrive,queue1,outcome1,queue2,t_depart,response`.
pub fn write_trace_csv<W: Write>(out: W, jobs: &[Job]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id", "t_arrive", "queue1", "outcome1", "queue2", "t_depart", "response",
    ])?;
    for j in jobs {
        let first = j
            .visits
            .iter()
            .find(|v| v.outcome != Outcome::Cancelled)
            .or(j.visits.first());
        let second = j
            .visits
            .iter()
            .skip_while(|v| v.outcome != Outcome::TimedOut)
            .nth(1);
        w.write_record([
            j.id.to_string(),
            j.t_arrive.to_string(),
            first.map_or(String::new(), |v| v.queue.to_string()),
            first.map_or("", |v| v.outcome.as_str()).to_string(),
            second.map_or(String::new(), |v| v.queue.to_string()),
            j.t_depart.to_string(),
            j.response().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
