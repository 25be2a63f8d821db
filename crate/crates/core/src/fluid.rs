//! Fluid model of the multiclass network and its Lyapunov drain.
//!
//! Jobs dispatched to queue `i` form class `(c, i)` if they finish before the
//! timeout and `(u, i)` otherwise; a timed-out job from `j` re-routed to `i`
//! belongs to class `(j, i)`. The fluid equations are integrated with an
//! explicit Euler scheme in which each queue splits its capacity among its
//! nonempty classes in proportion to their mass.

use std::io::Write;

use serde::Serialize;

use crate::analytic::{nominal_load, NetworkConfig};
use crate::error::{Error, Result};

const MASS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Exo {
    Completes,
    Uncompleted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ClassId {
    Exo { kind: Exo, queue: usize },
    Endo { from: usize, to: usize },
}

impl ClassId {
    /// Dense index in `0..2N + N²`.
    pub fn index(self, n: usize) -> usize {
        match self {
            ClassId::Exo {
                kind: Exo::Completes,
                queue,
            } => queue,
            ClassId::Exo {
                kind: Exo::Uncompleted,
                queue,
            } => n + queue,
            ClassId::Endo { from, to } => 2 * n + from * n + to,
        }
    }

    pub fn from_index(k: usize, n: usize) -> Self {
        match k {
            k if k < n => ClassId::Exo {
                kind: Exo::Completes,
                queue: k,
            },
            k if k < 2 * n => ClassId::Exo {
                kind: Exo::Uncompleted,
                queue: k - n,
            },
            k => ClassId::Endo {
                from: (k - 2 * n) / n,
                to: (k - 2 * n) % n,
            },
        }
    }

    /// Queue that serves this class.
    pub fn queue(self) -> usize {
        match self {
            ClassId::Exo { queue, .. } => queue,
            ClassId::Endo { to, .. } => to,
        }
    }

    pub fn count(n: usize) -> usize {
        2 * n + n * n
    }
}

/// Fluid masses, cumulative allocated times and cumulative idle times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluidState {
    pub qbar: Vec<f64>,
    pub tbar: Vec<f64>,
    pub ibar: Vec<f64>,
    pub t: f64,
}

impl FluidState {
    pub fn empty(n: usize) -> Self {
        let k = ClassId::count(n);
        FluidState {
            qbar: vec![0.0; k],
            tbar: vec![0.0; k],
            ibar: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn with_mass(n: usize, masses: &[(ClassId, f64)]) -> Self {
        let mut s = Self::empty(n);
        for &(c, m) in masses {
            s.qbar[c.index(n)] += m;
        }
        s
    }

    pub fn mass(&self, c: ClassId, n: usize) -> f64 {
        self.qbar[c.index(n)]
    }

    pub fn total_mass(&self) -> f64 {
        self.qbar.iter().sum()
    }

    pub fn queue_mass(&self, i: usize, n: usize) -> f64 {
        (0..ClassId::count(n))
            .filter(|&k| ClassId::from_index(k, n).queue() == i)
            .map(|k| self.qbar[k])
            .sum()
    }
}

/// Per-class arrival rates and mean service times derived from a config.
#[derive(Debug, Clone)]
pub struct FluidNetwork {
    pub n: usize,
    pub arrival: Vec<f64>,
    pub service_mean: Vec<f64>,
    pub p1: Vec<f64>,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl FluidNetwork {
    pub fn new(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig(
                "fluid model needs finite timeouts".into(),
            ));
        }
        let n = cfg.n;
        let k = ClassId::count(n);
        let mut arrival = vec![0.0; k];
        let mut service_mean = vec![0.0; k];
        let total_rate = cfg.lambda * n as f64;
        let mut restart_mean = vec![0.0; n];
        for i in 0..n {
            let c = cfg.mu[i] * cfg.tau[i];
            let w = cfg.model.work_moments(c)?;
            let p = w.exceed_prob;
            let cidx = ClassId::Exo {
                kind: Exo::Completes,
                queue: i,
            }
            .index(n);
            let uidx = ClassId::Exo {
                kind: Exo::Uncompleted,
                queue: i,
            }
            .index(n);
            arrival[cidx] = total_rate * cfg.p0[i] * (1.0 - p);
            arrival[uidx] = total_rate * cfg.p0[i] * p;
            service_mean[cidx] = if p < 1.0 {
                (w.trunc_mean - c * p) / (1.0 - p) / cfg.mu[i]
            } else {
                cfg.tau[i]
            };
            service_mean[uidx] = cfg.tau[i];
            restart_mean[i] = if p > 0.0 {
                w.eta2_exceed / p
            } else {
                cfg.model.eta1_mean()
            };
        }
        for j in 0..n {
            for i in 0..n {
                service_mean[ClassId::Endo { from: j, to: i }.index(n)] =
                    restart_mean[j] / cfg.mu[i];
            }
        }
        let mut members = vec![Vec::new(); n];
        for idx in 0..k {
            members[ClassId::from_index(idx, n).queue()].push(idx);
        }
        Ok(FluidNetwork {
            n,
            arrival,
            service_mean,
            p1: cfg.p1.clone(),
            mu: cfg.mu.clone(),
            rho: nominal_load(cfg)?,
            members,
        })
    }

    /// Smallest positive class service mean; sets the default step scale.
    pub fn min_service_mean(&self) -> f64 {
        self.service_mean
            .iter()
            .copied()
            .filter(|&m| m > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// One Euler step of length `h`.
    pub fn step(&self, s: &mut FluidState, h: f64) {
        let n = self.n;
        let mut departures = vec![0.0; ClassId::count(n)];
        for (i, members) in self.members.iter().enumerate() {
            let avail: Vec<f64> = members
                .iter()
                .map(|&k| s.qbar[k] + h * self.arrival[k])
                .collect();
            let demand: Vec<f64> = members
                .iter()
                .zip(&avail)
                .map(|(&k, a)| a * self.service_mean[k])
                .collect();
            let (alloc, saturated) = water_fill(&avail, &demand, h);
            let busy: f64 = alloc.iter().sum();
            for ((&k, a), t) in members.iter().zip(&avail).zip(&alloc) {
                let m = self.service_mean[k];
                let served = if m > 0.0 { (t / m).min(*a) } else { *a };
                departures[k] = served;
                s.qbar[k] = a - served;
                s.tbar[k] += t;
            }
            if !saturated {
                s.ibar[i] += (h - busy).max(0.0);
            }
        }
        for j in 0..n {
            let out = departures[ClassId::Exo {
                kind: Exo::Uncompleted,
                queue: j,
            }
            .index(n)];
            if out > 0.0 {
                for i in 0..n {
                    s.qbar[ClassId::Endo { from: j, to: i }.index(n)] += self.p1[i] * out;
                }
            }
        }
        for q in &mut s.qbar {
            if *q < MASS_FLOOR {
                *q = 0.0;
            }
        }
        s.t += h;
    }

    /// `G_i` for every queue: the weighted mass functional divided by `p1_i/μ_i`.
    pub fn lyapunov(&self, s: &FluidState) -> Lyapunov {
        let n = self.n;
        let per_queue: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = 0.0;
                for &k in &self.members[i] {
                    v += self.service_mean[k] * s.qbar[k];
                }
                for j in 0..n {
                    let u = s.qbar[ClassId::Exo {
                        kind: Exo::Uncompleted,
                        queue: j,
                    }
                    .index(n)];
                    v += self.service_mean[ClassId::Endo { from: j, to: i }.index(n)]
                        * self.p1[i]
                        * u;
                }
                if v == 0.0 {
                    0.0
                } else if self.p1[i] == 0.0 {
                    f64::INFINITY
                } else {
                    v * self.mu[i] / self.p1[i]
                }
            })
            .collect();
        let g = per_queue.iter().copied().fold(0.0, f64::max);
        Lyapunov { per_queue, g }
    }

    /// Integrates to `horizon`, calling `visit` on the initial state and after every step.
    pub fn integrate_with<F: FnMut(&FluidState)>(
        &self,
        initial: &FluidState,
        horizon: f64,
        step: f64,
        mut visit: F,
    ) -> Result<FluidState> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::NonpositiveStep(step));
        }
        if !(horizon >= step) {
            return Err(Error::InvalidParameters(format!(
                "horizon {horizon} shorter than step {step}"
            )));
        }
        if initial.qbar.len() != ClassId::count(self.n) || initial.qbar.iter().any(|&q| !(q >= 0.0))
        {
            return Err(Error::InvalidParameters(
                "initial state does not match the network".into(),
            ));
        }
        let steps = (horizon / step).round() as u64;
        let mut s = initial.clone();
        visit(&s);
        for _ in 0..steps {
            self.step(&mut s, step);
            visit(&s);
        }
        Ok(s)
    }
}

/// Splits `h` units of time among classes in proportion to `avail`, never
/// giving a class more than its `demand`. The flag is set when all of `h` is used.
fn water_fill(avail: &[f64], demand: &[f64], h: f64) -> (Vec<f64>, bool) {
    let mut alloc = vec![0.0; avail.len()];
    if demand.iter().sum::<f64>() <= h {
        alloc.copy_from_slice(demand);
        return (alloc, false);
    }
    let mut active: Vec<usize> = (0..avail.len()).filter(|&k| avail[k] > 0.0).collect();
    let mut budget = h;
    loop {
        let weight: f64 = active.iter().map(|&k| avail[k]).sum();
        let capped: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&k| demand[k] <= budget * avail[k] / weight)
            .collect();
        if capped.is_empty() {
            for &k in &active {
                alloc[k] = budget * avail[k] / weight;
            }
            return (alloc, true);
        }
        for &k in &capped {
            alloc[k] = demand[k];
            budget -= demand[k];
        }
        active.retain(|k| !capped.contains(k));
        if active.is_empty() {
            return (alloc, true);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lyapunov {
    pub per_queue: Vec<f64>,
    #[serde(rename = "G")]
    pub g: f64,
}

pub fn lyapunov(state: &FluidState, cfg: &NetworkConfig) -> Result<Lyapunov> {
    Ok(FluidNetwork::new(cfg)?.lyapunov(state))
}

/// Full Euler trajectory, one state per step.
pub fn fluid_integrate(
    cfg: &NetworkConfig,
    initial: &FluidState,
    horizon: f64,
    step: f64,
) -> Result<Vec<FluidState>> {
    let net = FluidNetwork::new(cfg)?;
    let mut out = Vec::new();
    net.integrate_with(initial, horizon, step, |s| out.push(s.clone()))?;
    Ok(out)
}

/// Summary of a drain run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrainReport {
    pub g0: f64,
    pub g_end: f64,
    /// First time `G` falls to `1e-3·G(0)` or below.
    pub empty_time: Option<f64>,
    /// Largest single-step increase of `G`.
    pub max_increase: f64,
    pub max_rho: f64,
}

impl DrainReport {
    pub fn nonincreasing(&self, tol: f64) -> bool {
        self.max_increase <= tol
    }
}

/// A trajectory sample for CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub g: f64,
    pub per_queue: Vec<f64>,
    pub total_mass: f64,
}

/// Integrates and tracks `G`, keeping every `record_every`-th sample.
pub fn drain(
    cfg: &NetworkConfig,
    initial: &FluidState,
    horizon: f64,
    step: f64,
    record_every: usize,
) -> Result<(DrainReport, Vec<TrajectoryRow>)> {
    let net = FluidNetwork::new(cfg)?;
    let g0 = net.lyapunov(initial).g;
    let mut prev = g0;
    let mut max_increase = f64::NEG_INFINITY;
    let mut empty_time = None;
    let mut rows = Vec::new();
    let mut count = 0usize;
    let every = record_every.max(1);
    let last = net.integrate_with(initial, horizon, step, |s| {
        let l = net.lyapunov(s);
        if count > 0 {
            max_increase = max_increase.max(l.g - prev);
        }
        prev = l.g;
        if empty_time.is_none() && l.g <= 1e-3 * g0 {
            empty_time = Some(s.t);
        }
        if count.is_multiple_of(every) {
            rows.push(TrajectoryRow {
                t: s.t,
                g: l.g,
                per_queue: l.per_queue,
                total_mass: s.total_mass(),
            });
        }
        count += 1;
    })?;
    let g_end = net.lyapunov(&last).g;
    if rows.last().map(|r| r.t) != Some(last.t) {
        let l = net.lyapunov(&last);
        rows.push(TrajectoryRow {
            t: last.t,
            g: l.g,
            per_queue: l.per_queue,
            total_mass: last.total_mass(),
        });
    }
    let max_rho = net.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((
        DrainReport {
            g0,
            g_end,
            empty_time,
            max_increase,
            max_rho,
        },
        rows,
    ))
}

/// Writes `t,G,G_1..G_N,total_mass`.
pub fn write_trajectory_csv<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = rows.first().map_or(0, |r| r.per_queue.len());
    let mut header = vec!["t".to_string(), "G".to_string()];
    header.extend((1..=n).map(|i| format!("G_{i}")));
    header.push("total_mass".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.t.to_string(), r.g.to_string()];
        rec.extend(r.per_queue.iter().map(f64::to_string));
        rec.push(r.total_mass.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
