//! Deterministic discrete-event simulation of one parameter server and `P`
//! learners.
//!
//! Each learner fetches the current parameters, draws a service time and a
//! stochastic gradient from its own random stream (in that order), and
//! completes after the service time elapses. Completions are ordered by
//! time, then learner id. All completions sharing a timestamp are handed to
//! the server first; learners that restart at that instant fetch the
//! parameters only after every update due at that instant has been applied.
//!
//! | protocol        | server waits for         | stragglers | who refetches           |
//! |-----------------|--------------------------|------------|-------------------------|
//! | `KSync`         | first K learners         | cancelled  | everyone                |
//! | `KBatchSync`    | first K mini-batches     | cancelled  | everyone                |
//! | `KAsync`        | first K learners         | keep going | the K contributors      |
//! | `KBatchAsync`   | any K mini-batches       | keep going | each finisher, at once  |

mod events;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimization::{dist_sq, norm_sq, LrSchedule, Objective};
use crate::rng::{self, SimRng};
use crate::runtime::RuntimeDistribution;

pub use events::{Completion, EventQueue};
pub use trace::{read_rows, write_rows, CsvRow, RuntimeMeasurement, SimTrace, TraceRecord, MIN_RUNTIME_RECORDS, TRACE_HEADER};

/// Loss above which a run is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    KSync,
    KBatchSync,
    KAsync,
    KBatchAsync,
}

impl Protocol {
    pub fn is_synchronous(self) -> bool {
        matches!(self, Protocol::KSync | Protocol::KBatchSync)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::KSync => "k-sync",
            Protocol::KBatchSync => "k-batch-sync",
            Protocol::KAsync => "k-async",
            Protocol::KBatchAsync => "k-batch-async",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "k-sync" => Protocol::KSync,
            "k-batch-sync" => Protocol::KBatchSync,
            "k-async" => Protocol::KAsync,
            "k-batch-async" => Protocol::KBatchAsync,
            other => return Err(Error::InvalidVariant(format!("unknown protocol {other:?}"))),
        })
    }
}

/// Protocol selection and its sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub protocol: Protocol,
    /// Number of learners `P`.
    pub learners: usize,
    /// Learners (or mini-batches) to wait for, `K`.
    pub wait_for: usize,
    /// Mini-batch size `m`.
    #[serde(default = "one")]
    pub batch_size: usize,
    pub schedule: LrSchedule,
    /// Number of server updates `J`.
    pub iterations: usize,
    /// Keep every iterate in the trace (needed for staleness-drift estimates).
    #[serde(default)]
    pub record_snapshots: bool,
}

fn one() -> usize {
    1
}

impl VariantConfig {
    pub fn new(protocol: Protocol, learners: usize, wait_for: usize, schedule: LrSchedule, iterations: usize) -> Self {
        VariantConfig { protocol, learners, wait_for, batch_size: 1, schedule, iterations, record_snapshots: false }
    }

    pub fn with_batch_size(mut self, m: usize) -> Self {
        self.batch_size = m;
        self
    }

    pub fn with_snapshots(mut self, on: bool) -> Self {
        self.record_snapshots = on;
        self
    }

    /// All violated constraints, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.learners == 0 {
            v.push("learners must be >= 1".to_string());
        }
        if self.wait_for == 0 || self.wait_for > self.learners {
            v.push(format!("wait_for must satisfy 1 <= K <= P, got K={} P={}", self.wait_for, self.learners));
        }
        if self.batch_size == 0 {
            v.push("batch_size must be >= 1".to_string());
        }
        if self.iterations == 0 {
            v.push("iterations must be >= 1".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidVariant(v.join("; ")))
        }
    }
}

/// Per-learner state.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub id: usize,
    pub busy_until: f64,
    /// Server iteration at which the current parameters were fetched.
    pub read_iteration: usize,
    pub read_params: Vec<f64>,
    grad: Vec<f64>,
    rng: SimRng,
}

/// A gradient waiting at the server.
#[derive(Debug, Clone)]
struct Contribution {
    read_iteration: usize,
    grad: Vec<f64>,
    read_params: Vec<f64>,
}

/// Builder for one simulation run.
pub struct Simulation<'a> {
    config: &'a VariantConfig,
    objective: &'a dyn Objective,
    distribution: &'a RuntimeDistribution,
    master_seed: u64,
    replication: u64,
    initial_point: Option<Vec<f64>>,
}

impl<'a> Simulation<'a> {
    pub fn new(config: &'a VariantConfig, objective: &'a dyn Objective, distribution: &'a RuntimeDistribution) -> Self {
        Simulation { config, objective, distribution, master_seed: 0, replication: 0, initial_point: None }
    }

    pub fn seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn replication(mut self, replication: u64) -> Self {
        self.replication = replication;
        self
    }

    pub fn initial_point(mut self, w0: Vec<f64>) -> Self {
        self.initial_point = Some(w0);
        self
    }

    pub fn run(self) -> Result<SimTrace> {
        self.config.validate()?;
        let w0 = self.initial_point.clone().unwrap_or_else(|| self.objective.initial_point());
        if w0.len() != self.objective.dim() {
            return Err(Error::InvalidVariant(format!(
                "initial point has dimension {}, objective has {}",
                w0.len(),
                self.objective.dim()
            )));
        }
        let mut engine = Engine::new(&self, w0);
        match self.config.protocol {
            Protocol::KSync => engine.run_ksync(),
            Protocol::KBatchSync => engine.run_kbatchsync(),
            Protocol::KAsync => engine.run_async(false),
            Protocol::KBatchAsync => engine.run_async(true),
        }
        Ok(engine.finish(&self))
    }
}

/// Runs replication 0 of `config` under `master_seed`.
pub fn run(
    config: &VariantConfig,
    objective: &dyn Objective,
    distribution: &RuntimeDistribution,
    master_seed: u64,
) -> Result<SimTrace> {
    Simulation::new(config, objective, distribution).seed(master_seed).run()
}

pub fn run_replication(
    config: &VariantConfig,
    objective: &dyn Objective,
    distribution: &RuntimeDistribution,
    master_seed: u64,
    replication: u64,
) -> Result<SimTrace> {
    Simulation::new(config, objective, distribution).seed(master_seed).replication(replication).run()
}

struct Engine<'a> {
    config: &'a VariantConfig,
    objective: &'a dyn Objective,
    distribution: &'a RuntimeDistribution,
    w: Vec<f64>,
    update: Vec<f64>,
    scratch: Vec<f64>,
    iteration: usize,
    clock: f64,
    learners: Vec<LearnerState>,
    records: Vec<TraceRecord>,
    initial_loss: f64,
    snapshots: Option<Vec<Vec<f64>>>,
    diverged_at: Option<usize>,
}

impl<'a> Engine<'a> {
    fn new(sim: &Simulation<'a>, w0: Vec<f64>) -> Self {
        let dim = w0.len();
        let learners = (0..sim.config.learners)
            .map(|id| LearnerState {
                id,
                busy_until: 0.0,
                read_iteration: 0,
                read_params: w0.clone(),
                grad: vec![0.0; dim],
                rng: rng::stream(sim.master_seed, sim.replication, id as u64),
            })
            .collect();
        Engine {
            config: sim.config,
            objective: sim.objective,
            distribution: sim.distribution,
            initial_loss: sim.objective.loss(&w0),
            snapshots: sim.config.record_snapshots.then(|| vec![w0.clone()]),
            update: vec![0.0; dim],
            scratch: vec![0.0; dim],
            w: w0,
            iteration: 0,
            clock: 0.0,
            learners,
            records: Vec::with_capacity(sim.config.iterations),
            diverged_at: None,
        }
    }

    fn done(&self) -> bool {
        self.iteration >= self.config.iterations || self.diverged_at.is_some()
    }

    /// Learner `id` fetches the current parameters at time `now` and begins a mini-batch.
    fn start(&mut self, id: usize, now: f64) {
        let l = &mut self.learners[id];
        l.read_iteration = self.iteration;
        l.read_params.copy_from_slice(&self.w);
        l.busy_until = now + self.distribution.sample(&mut l.rng);
        self.objective
            .stochastic_grad_into(&self.w, self.config.batch_size, &mut l.rng, &mut l.grad);
    }

    fn take(&self, id: usize) -> Contribution {
        let l = &self.learners[id];
        Contribution { read_iteration: l.read_iteration, grad: l.grad.clone(), read_params: l.read_params.clone() }
    }

    /// Applies one server update at time `now` from `batch`.
    fn apply(&mut self, batch: &[Contribution], now: f64) {
        let j = self.iteration;
        let staleness: Vec<usize> = batch.iter().map(|c| j - c.read_iteration).collect();
        let eta = match self.config.schedule {
            LrSchedule::Fixed { eta } => eta,
            schedule => {
                let drift = batch.iter().map(|c| dist_sq(&self.w, &c.read_params)).fold(0.0, f64::max);
                schedule.rate(drift)
            }
        };
        self.update.iter_mut().for_each(|u| *u = 0.0);
        for c in batch {
            for (u, g) in self.update.iter_mut().zip(&c.grad) {
                *u += g;
            }
        }
        let step = eta / batch.len() as f64;
        for (w, u) in self.w.iter_mut().zip(&self.update) {
            *w -= step * u;
        }
        self.iteration += 1;
        self.clock = now;
        let loss = self.objective.loss(&self.w);
        self.objective.grad_into(&self.w, &mut self.scratch);
        let grad_norm = norm_sq(&self.scratch).sqrt();
        self.records.push(TraceRecord { iteration: self.iteration, wallclock: now, loss, staleness, eta, grad_norm });
        if let Some(s) = self.snapshots.as_mut() {
            s.push(self.w.clone());
        }
        if !loss.is_finite() || loss > DIVERGENCE_THRESHOLD {
            self.diverged_at = Some(self.iteration);
        }
    }

    fn run_ksync(&mut self) {
        let p = self.config.learners;
        let k = self.config.wait_for;
        let mut order: Vec<Completion> = Vec::with_capacity(p);
        while !self.done() {
            let now = self.clock;
            order.clear();
            for id in 0..p {
                self.start(id, now);
                order.push(Completion { time: self.learners[id].busy_until, learner: id });
            }
            order.select_nth_unstable(k - 1);
            order[..k].sort_unstable();
            let batch: Vec<Contribution> = order[..k].iter().map(|c| self.take(c.learner)).collect();
            self.apply(&batch, order[k - 1].time);
        }
    }

    fn run_kbatchsync(&mut self) {
        let p = self.config.learners;
        let k = self.config.wait_for;
        let mut queue = EventQueue::with_capacity(p);
        let mut batch = Vec::with_capacity(k);
        while !self.done() {
            let now = self.clock;
            queue.clear();
            batch.clear();
            for id in 0..p {
                self.start(id, now);
                queue.push(self.learners[id].busy_until, id);
            }
            let mut at = now;
            while batch.len() < k {
                let c = queue.pop().expect("learners are always busy");
                batch.push(self.take(c.learner));
                at = c.time;
                if batch.len() < k {
                    self.start(c.learner, c.time);
                    queue.push(self.learners[c.learner].busy_until, c.learner);
                }
            }
            self.apply(&batch, at);
        }
    }

    /// Shared loop for K-async (`batch_any = false`: a finisher idles until
    /// its gradient is applied) and K-batch-async (`batch_any = true`: a
    /// finisher refetches immediately).
    fn run_async(&mut self, batch_any: bool) {
        let p = self.config.learners;
        let k = self.config.wait_for;
        let mut queue = EventQueue::with_capacity(p);
        for id in 0..p {
            self.start(id, 0.0);
            queue.push(self.learners[id].busy_until, id);
        }
        let mut pending: Vec<Contribution> = Vec::with_capacity(k);
        let mut pending_ids: Vec<usize> = Vec::with_capacity(k);
        let mut group = Vec::with_capacity(p);
        let mut restart = Vec::with_capacity(p);
        while !self.done() {
            queue.pop_simultaneous(&mut group);
            let Some(now) = group.first().map(|c| c.time) else { break };
            restart.clear();
            for c in &group {
                pending.push(self.take(c.learner));
                pending_ids.push(c.learner);
                if batch_any {
                    restart.push(c.learner);
                }
                if pending.len() == k {
                    self.apply(&pending, now);
                    pending.clear();
                    if !batch_any {
                        restart.append(&mut pending_ids);
                    }
                    pending_ids.clear();
                    if self.done() {
                        break;
                    }
                }
            }
            restart.sort_unstable();
            for &id in &restart {
                self.start(id, now);
                queue.push(self.learners[id].busy_until, id);
            }
        }
    }

    fn finish(self, sim: &Simulation<'_>) -> SimTrace {
        SimTrace {
            config: self.config.clone(),
            master_seed: sim.master_seed,
            replication: sim.replication,
            initial_loss: self.initial_loss,
            records: self.records,
            final_params: self.w,
            snapshots: self.snapshots,
            diverged_at: self.diverged_at,
        }
    }
}
