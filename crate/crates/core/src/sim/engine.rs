//! Event loop shared by all schemes.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::scheme::{Discipline, Scheme};
use super::{Job, Outcome, Visit};
use crate::analytic::NetworkConfig;
use crate::dists::{stream, Purpose, SxMode};
use crate::fluid::{ClassId, Exo};

/// One job as it enters the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub t: f64,
    pub x: f64,
    /// `S₁, S₂, …`; replicas and the restart copy take them in order.
    pub slowdowns: Vec<f64>,
}

/// Poisson arrivals at rate `λN` with S&X service draws, one stream per job.
pub struct PoissonSource<'a> {
    cfg: &'a NetworkConfig,
    seed: u64,
    n_jobs: usize,
    next: usize,
    t: f64,
    clock: ChaCha8Rng,
    gap: Option<Exp<f64>>,
    draws: usize,
}

impl<'a> PoissonSource<'a> {
    pub fn new(cfg: &'a NetworkConfig, scheme: &Scheme, n_jobs: usize, seed: u64) -> Self {
        let rate = cfg.lambda * cfg.n as f64;
        PoissonSource {
            cfg,
            seed,
            n_jobs,
            next: 0,
            t: 0.0,
            clock: stream(seed, Purpose::Arrivals, 0),
            gap: (rate > 0.0).then(|| Exp::new(rate).expect("positive rate")),
            draws: scheme.slowdowns_needed(),
        }
    }
}

impl Iterator for PoissonSource<'_> {
    type Item = Arrival;

    fn next(&mut self) -> Option<Arrival> {
        if self.next >= self.n_jobs {
            return None;
        }
        self.t += match &self.gap {
            Some(e) => e.sample(&mut self.clock),
            None if self.next == 0 => 0.0,
            None => f64::INFINITY,
        };
        let mut rng = stream(self.seed, Purpose::Sizes, self.next as u64);
        let model = &self.cfg.model;
        let x = model.size.sample(&mut rng);
        let slowdowns = (0..self.draws)
            .map(|_| model.slowdown.sample(&mut rng))
            .collect();
        self.next += 1;
        Some(Arrival {
            t: self.t,
            x,
            slowdowns,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReplicaState {
    Waiting,
    InService,
    Finished,
    Cancelled,
}

#[derive(Debug, Clone)]
struct Replica {
    job: u32,
    queue: u32,
    size: f64,
    timeout: f64,
    retry: bool,
    t_start: f64,
    state: ReplicaState,
}

#[derive(Debug, Clone, Default)]
struct Server {
    current: Option<u32>,
    generation: u64,
    fresh: VecDeque<u32>,
    retry: VecDeque<u32>,
    live_waiting: usize,
    backlog_until: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Arrival,
    End { queue: u32, generation: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Event {
    // reversed: BinaryHeap pops the earliest (time, seq)
    fn cmp(&self, o: &Self) -> Ordering {
        o.t.total_cmp(&self.t).then(o.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone)]
struct JobState {
    first_replica: u32,
    n_replicas: u32,
    first_queue: u32,
    x: f64,
    eta1: f64,
    s2: f64,
    messages: u32,
    timed_out: bool,
}

/// Raw per-job output of one run.
pub struct RunRecord {
    pub arrive: Vec<f64>,
    pub depart: Vec<f64>,
    pub messages: Vec<u32>,
    pub timed_out: Vec<bool>,
    /// Service received by the path that completed the job.
    pub service: Vec<f64>,
    pub max_in_system: usize,
    pub violations: u64,
    pub end_time: f64,
    pub jobs: Option<Vec<Job>>,
    pub replicas_dispatched: u64,
    pub replicas_cancelled: u64,
}

pub struct Engine<'a> {
    cfg: &'a NetworkConfig,
    scheme: Scheme,
    discipline: Discipline,
    seed: u64,
    servers: Vec<Server>,
    replicas: Vec<Replica>,
    jobs: Vec<JobState>,
    heap: BinaryHeap<Event>,
    seq: u64,
    now: f64,
    in_system: usize,
    record: RunRecord,
    trace: bool,
}

fn categorical<R: Rng>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(p.len() - 1)
}

impl<'a> Engine<'a> {
    pub fn new(
        cfg: &'a NetworkConfig,
        scheme: Scheme,
        discipline: Discipline,
        seed: u64,
        trace: bool,
    ) -> Self {
        Engine {
            cfg,
            scheme,
            discipline,
            seed,
            servers: vec![Server::default(); cfg.n],
            replicas: Vec::new(),
            jobs: Vec::new(),
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            in_system: 0,
            record: RunRecord {
                arrive: Vec::new(),
                depart: Vec::new(),
                messages: Vec::new(),
                timed_out: Vec::new(),
                service: Vec::new(),
                max_in_system: 0,
                violations: 0,
                end_time: 0.0,
                jobs: trace.then(Vec::new),
                replicas_dispatched: 0,
                replicas_cancelled: 0,
            },
            trace,
        }
    }

    fn push(&mut self, t: f64, kind: Kind) {
        self.seq += 1;
        self.heap.push(Event {
            t,
            seq: self.seq,
            kind,
        });
    }

    /// Runs every arrival of `source` and drains the network.
    pub fn run<I: Iterator<Item = Arrival>>(mut self, mut source: I) -> RunRecord {
        let mut pending = source.next();
        if let Some(a) = &pending {
            self.push(a.t, Kind::Arrival);
        }
        while let Some(ev) = self.heap.pop() {
            if ev.t < self.now {
                self.record.violations += 1;
            }
            self.now = ev.t;
            match ev.kind {
                Kind::Arrival => {
                    let a = pending.take().expect("arrival event without a job");
                    self.arrive(a);
                    pending = source.next();
                    if let Some(a) = &pending {
                        if a.t.is_finite() {
                            self.push(a.t, Kind::Arrival);
                        }
                    }
                }
                Kind::End { queue, generation } => {
                    if self.servers[queue as usize].generation == generation {
                        self.end(queue as usize);
                    }
                }
            }
        }
        self.record.end_time = self.now;
        self.record.messages = self.jobs.iter().map(|j| j.messages).collect();
        self.record
    }

    fn arrive(&mut self, a: Arrival) {
        let id = self.jobs.len() as u32;
        let mut route = stream(self.seed, Purpose::Routing, id as u64);
        self.in_system += 1;
        self.record.max_in_system = self.record.max_in_system.max(self.in_system);
        self.record.arrive.push(a.t);
        self.record.depart.push(f64::NAN);
        self.record.timed_out.push(false);
        self.record.service.push(0.0);
        if let Some(jobs) = self.record.jobs.as_mut() {
            jobs.push(Job {
                id: id as usize,
                t_arrive: a.t,
                x: a.x,
                s1: a.slowdowns[0],
                s2: a.slowdowns.get(1).copied().unwrap_or(f64::NAN),
                class: ClassId::Exo {
                    kind: Exo::Completes,
                    queue: 0,
                },
                visits: Vec::new(),
                t_depart: f64::NAN,
            });
        }
        let n = self.cfg.n;
        let mu = &self.cfg.mu;
        let (targets, messages): (Vec<(usize, f64)>, u32) = match self.scheme {
            Scheme::Slb | Scheme::Rnd => {
                let q = categorical(&mut route, &self.cfg.p0);
                (vec![(q, a.slowdowns[0])], 1)
            }
            Scheme::CoC(d) => {
                let qs = sample_indices(&mut route, n, d);
                (
                    qs.iter()
                        .enumerate()
                        .map(|(c, q)| (q, a.slowdowns[c]))
                        .collect(),
                    (2 * d - 1) as u32,
                )
            }
            Scheme::CoS(d) => {
                let qs: Vec<usize> = sample_indices(&mut route, n, d).into_vec();
                let load = |q: usize| (self.servers[q].backlog_until - self.now).max(0.0);
                let best = qs.iter().map(|&q| load(q)).fold(f64::INFINITY, f64::min);
                let ties: Vec<usize> = qs.iter().copied().filter(|&q| load(q) == best).collect();
                let q = ties[route.random_range(0..ties.len())];
                (vec![(q, a.slowdowns[0])], (2 * d - 1) as u32)
            }
            Scheme::Riq(d) => {
                let qs: Vec<usize> = sample_indices(&mut route, n, d).into_vec();
                let idle: Vec<usize> = qs
                    .iter()
                    .copied()
                    .filter(|&q| self.servers[q].current.is_none())
                    .collect();
                if idle.is_empty() {
                    let q = qs[route.random_range(0..qs.len())];
                    (vec![(q, a.slowdowns[0])], 1)
                } else {
                    let k = idle.len();
                    (
                        idle.into_iter()
                            .enumerate()
                            .map(|(c, q)| (q, a.slowdowns[c]))
                            .collect(),
                        (2 * k - 1) as u32,
                    )
                }
            }
        };
        let first_queue = targets[0].0 as u32;
        let timeout = match self.scheme {
            Scheme::Slb => self.cfg.tau[first_queue as usize],
            _ => f64::INFINITY,
        };
        self.jobs.push(JobState {
            first_replica: self.replicas.len() as u32,
            n_replicas: targets.len() as u32,
            first_queue,
            x: a.x,
            eta1: a.slowdowns[0] * a.x,
            s2: a.slowdowns.get(1).copied().unwrap_or(a.slowdowns[0]),
            messages,
            timed_out: false,
        });
        self.record.replicas_dispatched += targets.len() as u64;
        for (q, s) in targets {
            let size = s * a.x / mu[q];
            let r = self.replicas.len() as u32;
            self.replicas.push(Replica {
                job: id,
                queue: q as u32,
                size,
                timeout,
                retry: false,
                t_start: f64::NAN,
                state: ReplicaState::Waiting,
            });
            self.enqueue(r);
        }
    }

    fn enqueue(&mut self, r: u32) {
        let (q, size, retry) = {
            let rep = &self.replicas[r as usize];
            (rep.queue as usize, rep.size, rep.retry)
        };
        let now = self.now;
        let server = &mut self.servers[q];
        server.backlog_until = server.backlog_until.max(now) + size;
        if retry && self.discipline != Discipline::Fcfs {
            server.retry.push_back(r);
        } else {
            server.fresh.push_back(r);
        }
        server.live_waiting += 1;
        self.try_start(q);
    }

    fn pop_live(&mut self, q: usize) -> Option<u32> {
        let server = &mut self.servers[q];
        let order: [bool; 2] = match self.discipline {
            Discipline::Fcfs | Discipline::PriorityFreshFirst => [false, true],
            Discipline::PriorityRetryFirst => [true, false],
        };
        for retry in order {
            let deque = if retry {
                &mut server.retry
            } else {
                &mut server.fresh
            };
            while let Some(r) = deque.pop_front() {
                if self.replicas[r as usize].state == ReplicaState::Waiting {
                    server.live_waiting -= 1;
                    return Some(r);
                }
            }
        }
        None
    }

    fn try_start(&mut self, q: usize) {
        if self.servers[q].current.is_none() {
            if let Some(r) = self.pop_live(q) {
                let now = self.now;
                let rep = &mut self.replicas[r as usize];
                rep.state = ReplicaState::InService;
                rep.t_start = now;
                let dur = if rep.size <= rep.timeout {
                    rep.size
                } else {
                    rep.timeout
                };
                let server = &mut self.servers[q];
                server.current = Some(r);
                let generation = server.generation;
                self.push(
                    now + dur,
                    Kind::End {
                        queue: q as u32,
                        generation,
                    },
                );
            }
        }
        let server = &self.servers[q];
        if server.current.is_none() && server.live_waiting > 0 {
            self.record.violations += 1;
        }
    }

    fn visit(&mut self, r: u32, outcome: Outcome) {
        if !self.trace {
            return;
        }
        let rep = &self.replicas[r as usize];
        let t_start = if rep.t_start.is_nan() {
            self.now
        } else {
            rep.t_start
        };
        let v = Visit {
            queue: rep.queue as usize,
            t_start,
            t_end: self.now,
            outcome,
        };
        if let Some(jobs) = self.record.jobs.as_mut() {
            jobs[rep.job as usize].visits.push(v);
        }
    }

    fn end(&mut self, q: usize) {
        let r = self.servers[q]
            .current
            .take()
            .expect("end event on idle server");
        self.servers[q].generation += 1;
        let (job, size, timeout, t_start) = {
            let rep = &self.replicas[r as usize];
            (rep.job as usize, rep.size, rep.timeout, rep.t_start)
        };
        self.replicas[r as usize].state = ReplicaState::Finished;
        if size <= timeout {
            self.visit(r, Outcome::Completed);
            self.complete(job, r, q, self.now - t_start);
        } else {
            self.visit(r, Outcome::TimedOut);
            self.time_out(job, timeout);
        }
        self.try_start(q);
    }

    fn complete(&mut self, job: usize, winner: u32, q: usize, served: f64) {
        self.in_system -= 1;
        self.record.depart[job] = self.now;
        self.record.service[job] += served;
        let js = self.jobs[job].clone();
        for r in js.first_replica..js.first_replica + js.n_replicas {
            if r == winner {
                continue;
            }
            match self.replicas[r as usize].state {
                ReplicaState::Waiting => {
                    self.replicas[r as usize].state = ReplicaState::Cancelled;
                    let sq = self.replicas[r as usize].queue as usize;
                    self.servers[sq].live_waiting -= 1;
                    self.record.replicas_cancelled += 1;
                    self.visit(r, Outcome::Cancelled);
                }
                ReplicaState::InService => {
                    self.replicas[r as usize].state = ReplicaState::Cancelled;
                    let sq = self.replicas[r as usize].queue as usize;
                    self.servers[sq].current = None;
                    self.servers[sq].generation += 1;
                    self.record.replicas_cancelled += 1;
                    self.visit(r, Outcome::Cancelled);
                    self.try_start(sq);
                }
                ReplicaState::Finished | ReplicaState::Cancelled => {}
            }
        }
        if let Some(jobs) = self.record.jobs.as_mut() {
            let j = &mut jobs[job];
            j.t_depart = self.now;
            let kind = if js.timed_out {
                Exo::Uncompleted
            } else {
                Exo::Completes
            };
            let queue = if js.timed_out {
                js.first_queue
            } else {
                q as u32
            } as usize;
            j.class = ClassId::Exo { kind, queue };
        }
    }

    fn time_out(&mut self, job: usize, timeout: f64) {
        let cfg = self.cfg;
        let mut route = stream(self.seed, Purpose::Routing, job as u64);
        // the first draw chose the first queue
        let _: f64 = route.random();
        let j = categorical(&mut route, &cfg.p1);
        let js = &mut self.jobs[job];
        js.timed_out = true;
        js.messages += 1;
        self.record.timed_out[job] = true;
        self.record.service[job] += timeout;
        let i = js.first_queue as usize;
        let work = match cfg.model.mode {
            SxMode::Restart => js.s2 * js.x,
            SxMode::Identical => js.eta1,
            SxMode::Resume => (js.eta1 - cfg.mu[i] * cfg.tau[i]).max(0.0),
        };
        let r = self.replicas.len() as u32;
        self.replicas.push(Replica {
            job: job as u32,
            queue: j as u32,
            size: work / cfg.mu[j],
            timeout: f64::INFINITY,
            retry: true,
            t_start: f64::NAN,
            state: ReplicaState::Waiting,
        });
        self.record.replicas_dispatched += 1;
        self.enqueue(r);
    }
}
