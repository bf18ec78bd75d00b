use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, NamedVariant};
use crate::error::{Error, Result};
use crate::optimization::{dist_sq, norm_sq, LrSchedule, Objective};
use crate::runtime::{Estimate, OrderStatMethod, RunningStats, RuntimeDistribution};
use crate::sim::{SimTrace, Simulation, VariantConfig};
use crate::theory::{self, BoundSeries, Guarantee, RuntimePrediction, TheoryParams, P0_MIN_RECORDS};

/// Snapshots are kept for the staleness-coefficient estimate only while
/// `iterations · dim` stays below this many values per replication.
pub const MAX_SNAPSHOT_VALUES: usize = 20_000_000;

/// Per-replication reduction of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub replication: u64,
    /// `F(w_0), …, F(w_n)`.
    pub losses: Vec<f64>,
    pub wallclock: Vec<f64>,
    pub eta: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub max_staleness: Vec<f64>,
    pub mean_staleness: Vec<f64>,
    pub runtime: Option<(f64, f64)>,
    pub fresh: usize,
    pub contributions: usize,
    pub gamma_terms: Option<(f64, f64)>,
    pub diverged_at: Option<usize>,
}

impl ReplicationSummary {
    pub fn from_trace(trace: &SimTrace, burn_in: usize, objective: Option<&dyn Objective>) -> Self {
        let mut fresh = 0;
        let mut contributions = 0;
        for r in &trace.records {
            contributions += r.staleness.len();
            fresh += r.staleness.iter().filter(|&&s| s == 0).count();
        }
        let gamma_terms = match (objective, &trace.snapshots) {
            (Some(obj), Some(snaps)) => {
                let grads: Vec<Vec<f64>> = snaps.iter().map(|w| obj.grad(w)).collect();
                let mut num = 0.0;
                let mut den = 0.0;
                for (j, rec) in trace.records.iter().enumerate() {
                    for &s in &rec.staleness {
                        num += dist_sq(&grads[j], &grads[j - s]);
                        den += norm_sq(&grads[j]);
                    }
                }
                Some((num, den))
            }
            _ => None,
        };
        ReplicationSummary {
            replication: trace.replication,
            losses: trace.losses(),
            wallclock: trace.records.iter().map(|r| r.wallclock).collect(),
            eta: trace.records.iter().map(|r| r.eta).collect(),
            grad_norm: trace.records.iter().map(|r| r.grad_norm).collect(),
            max_staleness: trace.records.iter().map(|r| r.max_staleness() as f64).collect(),
            mean_staleness: trace.records.iter().map(|r| r.mean_staleness()).collect(),
            runtime: trace.measure_runtime_per_iteration(burn_in).ok().map(|m| (m.mean, m.stderr)),
            fresh,
            contributions,
            gamma_terms,
            diverged_at: trace.diverged_at,
        }
    }

    /// Loss of the last iterate with wallclock `<= t`.
    pub fn loss_at(&self, t: f64) -> f64 {
        let n = self.wallclock.partition_point(|&w| w <= t);
        self.losses[n]
    }
}

/// Mean curve across replications; `stderr` is absent with one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl Curve {
    pub fn last(&self) -> Option<f64> {
        self.mean.last().copied()
    }
}

/// Per-iteration means of the remaining trace columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationColumns {
    pub wallclock: Vec<f64>,
    pub eta: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub max_staleness: Vec<f64>,
    pub mean_staleness: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    KSync,
    KAsync,
    VariableLr,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::KSync => "k_sync",
            BoundKind::KAsync => "k_async",
            BoundKind::VariableLr => "variable_lr",
        }
    }
}

/// Upper bound on `E[F(w_j)] − F*` shifted by `F*` so it sits on the loss scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundOverlay {
    pub kind: BoundKind,
    pub series: BoundSeries,
    pub optimal_value: f64,
}

impl BoundOverlay {
    pub fn loss_scale(&self) -> Vec<f64> {
        self.series.values.iter().map(|b| b + self.optimal_value).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub name: String,
    pub config: VariantConfig,
    pub replications: usize,
    /// Loss against iteration `0..=n` over replications that did not diverge.
    pub by_iteration: Curve,
    pub columns: IterationColumns,
    /// Loss against the common wallclock grid.
    pub by_wallclock: Curve,
    pub runtime: Option<Estimate>,
    pub theory_runtime: Option<RuntimePrediction>,
    pub p0: Option<theory::P0Estimate>,
    pub gamma: Option<theory::GammaEstimate>,
    pub bound: Option<BoundOverlay>,
    /// Why no bound is attached, when none is.
    pub bound_note: Option<String>,
    pub diverged: Vec<u64>,
    pub final_loss: f64,
    pub summaries: Vec<ReplicationSummary>,
}

impl VariantResult {
    pub fn loss_at_horizon(&self) -> f64 {
        self.by_wallclock.last().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub distribution: String,
    pub learners: usize,
    pub speedup: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub name: String,
    pub horizon: f64,
    pub variants: Vec<VariantResult>,
    pub speedup: Vec<SpeedupRow>,
}

impl ExperimentResult {
    pub fn has_divergence(&self) -> bool {
        self.variants.iter().any(|v| !v.diverged.is_empty())
    }

    pub fn variant(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.name == name)
    }
}

fn worker_count(cfg: &ExperimentConfig) -> usize {
    cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn wants_gamma(v: &VariantConfig, dim: usize) -> bool {
    !v.protocol.is_synchronous() && v.schedule.is_fixed() && v.iterations.saturating_mul(dim) <= MAX_SNAPSHOT_VALUES
}

/// Runs every replication of every variant and aggregates in replication
/// order, so results do not depend on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(cfg))
        .build()
        .map_err(|e| Error::InvalidVariant(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut variants = Vec::new();
    let mut horizon = cfg.horizon.unwrap_or(0.0);
    if !cfg.variants.is_empty() {
        let objective = cfg.objective.as_ref().expect("validated").build()?;
        let dist = cfg.distribution.as_ref().expect("validated");
        let jobs: Vec<(usize, u64)> = (0..cfg.variants.len())
            .flat_map(|v| (0..cfg.replications as u64).map(move |r| (v, r)))
            .collect();
        let summaries: Vec<ReplicationSummary> = jobs
            .par_iter()
            .map(|&(v, rep)| run_one(cfg, &cfg.variants[v], objective.as_ref(), dist, rep))
            .collect::<Result<_>>()?;
        let mut per_variant: Vec<Vec<ReplicationSummary>> = vec![Vec::new(); cfg.variants.len()];
        for (s, &(v, _)) in summaries.into_iter().zip(&jobs) {
            per_variant[v].push(s);
        }
        if cfg.horizon.is_none() {
            horizon = per_variant
                .iter()
                .flatten()
                .filter(|s| s.diverged_at.is_none())
                .filter_map(|s| s.wallclock.last().copied())
                .fold(f64::INFINITY, f64::min);
            if !horizon.is_finite() {
                horizon = 0.0;
            }
        }
        for (nv, reps) in cfg.variants.iter().zip(per_variant) {
            variants.push(aggregate(cfg, nv, reps, objective.clone(), dist, horizon)?);
        }
    }
    let speedup = match &cfg.speedup_table {
        Some(t) => speedup_rows(&t.distributions, &t.learners, t.samples, cfg.master_seed)?,
        None => Vec::new(),
    };
    Ok(ExperimentResult { name: cfg.name.clone(), horizon, variants, speedup })
}

fn run_one(
    cfg: &ExperimentConfig,
    nv: &NamedVariant,
    objective: &dyn Objective,
    dist: &RuntimeDistribution,
    rep: u64,
) -> Result<ReplicationSummary> {
    let gamma = wants_gamma(&nv.config, objective.dim());
    let config = nv.config.clone().with_snapshots(nv.config.record_snapshots || gamma);
    let trace = Simulation::new(&config, objective, dist).seed(cfg.master_seed).replication(rep).run()?;
    Ok(ReplicationSummary::from_trace(&trace, cfg.burn_in, gamma.then_some(objective)))
}

/// Sync-over-async speed-up for each law and learner count. Monte-Carlo is
/// used only where no closed form exists.
pub fn speedup_rows(
    dists: &[RuntimeDistribution],
    learners: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<SpeedupRow>> {
    let mut rows = Vec::new();
    for d in dists {
        for &p in learners {
            let speedup = match theory::speedup_sync_over_async(d, p, OrderStatMethod::Analytic) {
                Ok(e) => e,
                Err(Error::UnsupportedMethod(_)) => {
                    theory::speedup_sync_over_async(d, p, OrderStatMethod::MonteCarlo { samples, seed })?
                }
                Err(e) => return Err(e),
            };
            rows.push(SpeedupRow { distribution: d.name(), learners: p, speedup });
        }
    }
    Ok(rows)
}

fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64, u64) {
    let s: RunningStats = values.collect();
    (s.mean(), s.stderr(), s.count())
}

fn column_mean(reps: &[&ReplicationSummary], n: usize, f: impl Fn(&ReplicationSummary) -> &Vec<f64>) -> Vec<f64> {
    (0..n).map(|j| mean_stderr(reps.iter().map(|r| f(r)[j])).0).collect()
}

fn aggregate(
    cfg: &ExperimentConfig,
    nv: &NamedVariant,
    summaries: Vec<ReplicationSummary>,
    objective: Arc<dyn Objective>,
    dist: &RuntimeDistribution,
    horizon: f64,
) -> Result<VariantResult> {
    let config = &nv.config;
    let diverged: Vec<u64> = summaries.iter().filter(|s| s.diverged_at.is_some()).map(|s| s.replication).collect();
    let ok: Vec<&ReplicationSummary> = summaries.iter().filter(|s| s.diverged_at.is_none()).collect();
    let multi = ok.len() >= 2;

    let n = config.iterations;
    let (by_iteration, columns, by_wallclock) = if ok.is_empty() {
        let empty = Curve { x: Vec::new(), mean: Vec::new(), stderr: None };
        let cols = IterationColumns {
            wallclock: Vec::new(),
            eta: Vec::new(),
            grad_norm: Vec::new(),
            max_staleness: Vec::new(),
            mean_staleness: Vec::new(),
        };
        (empty.clone(), cols, empty)
    } else {
        let (mut mean, mut se) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
        for j in 0..=n {
            let (m, s, _) = mean_stderr(ok.iter().map(|r| r.losses[j]));
            mean.push(m);
            se.push(s);
        }
        let by_iteration = Curve { x: (0..=n).map(|j| j as f64).collect(), mean, stderr: multi.then_some(se) };
        let columns = IterationColumns {
            wallclock: column_mean(&ok, n, |r| &r.wallclock),
            eta: column_mean(&ok, n, |r| &r.eta),
            grad_norm: column_mean(&ok, n, |r| &r.grad_norm),
            max_staleness: column_mean(&ok, n, |r| &r.max_staleness),
            mean_staleness: column_mean(&ok, n, |r| &r.mean_staleness),
        };
        let g = cfg.grid_points;
        let xs: Vec<f64> = (0..g).map(|i| horizon * i as f64 / (g - 1) as f64).collect();
        let (mut mean, mut se) = (Vec::with_capacity(g), Vec::with_capacity(g));
        for &t in &xs {
            let (m, s, _) = mean_stderr(ok.iter().map(|r| r.loss_at(t)));
            mean.push(m);
            se.push(s);
        }
        (by_iteration, columns, Curve { x: xs, mean, stderr: multi.then_some(se) })
    };

    let measured: Vec<(f64, f64)> = ok.iter().filter_map(|r| r.runtime).collect();
    let runtime = match measured.len() {
        0 => None,
        1 => Some(Estimate { value: measured[0].0, stderr: measured[0].1 }),
        _ => {
            let (m, s, _) = mean_stderr(measured.iter().map(|x| x.0));
            Some(Estimate { value: m, stderr: s })
        }
    };
    let mc = OrderStatMethod::MonteCarlo { samples: cfg.monte_carlo_samples, seed: cfg.master_seed };
    let theory_runtime = theory::expected_runtime(config.protocol, dist, config.learners, config.wait_for, mc)?
        .filter(|p| p.guarantee != Guarantee::None);

    let contributions: usize = ok.iter().map(|r| r.contributions).sum();
    let fresh: usize = ok.iter().map(|r| r.fresh).sum();
    let records: usize = ok.iter().map(|r| r.wallclock.len()).sum();
    let p0 = if config.protocol.is_synchronous() {
        Some(theory::P0Estimate { value: 1.0, contributions, degenerate: true })
    } else if records >= P0_MIN_RECORDS && contributions > 0 {
        Some(theory::P0Estimate { value: fresh as f64 / contributions as f64, contributions, degenerate: false })
    } else {
        None
    };
    let gamma = if ok.is_empty() || ok.iter().any(|r| r.gamma_terms.is_none()) {
        None
    } else {
        let (num, den) = ok.iter().filter_map(|r| r.gamma_terms).fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let value = if den > 0.0 { num / den } else { 0.0 };
        Some(theory::GammaEstimate { value, hypothesis_violated: value > 1.0 })
    };

    let (bound, bound_note) = match attach_bound(config, objective.as_ref(), &ok, p0, gamma) {
        Ok(b) => (Some(b), None),
        Err(note) => (None, Some(note)),
    };

    let final_loss = by_iteration.last().unwrap_or(f64::NAN);
    Ok(VariantResult {
        name: nv.name.clone(),
        config: config.clone(),
        replications: summaries.len(),
        by_iteration,
        columns,
        by_wallclock,
        runtime,
        theory_runtime,
        p0,
        gamma,
        bound,
        bound_note,
        diverged,
        final_loss,
        summaries,
    })
}

fn attach_bound(
    config: &VariantConfig,
    objective: &dyn Objective,
    ok: &[&ReplicationSummary],
    p0: Option<theory::P0Estimate>,
    gamma: Option<theory::GammaEstimate>,
) -> std::result::Result<BoundOverlay, String> {
    if ok.is_empty() {
        return Err("every replication diverged".into());
    }
    let constants = objective.constants();
    let f0_gap = objective.gap(&objective.initial_point());
    let params = TheoryParams::from_parts(&constants, config);
    let overlay = |kind, series| BoundOverlay { kind, series, optimal_value: constants.optimal_value };
    let p0 = p0.ok_or_else(|| format!("fewer than {P0_MIN_RECORDS} records to estimate p0"))?;
    match (config.schedule, config.protocol.is_synchronous()) {
        (LrSchedule::Fixed { .. }, true) => {
            theory::bound_ksync(&params, f0_gap).map(|s| overlay(BoundKind::KSync, s)).map_err(|e| e.to_string())
        }
        (LrSchedule::Fixed { .. }, false) => {
            let gamma = gamma.ok_or("staleness coefficient not estimated")?;
            if gamma.hypothesis_violated {
                return Err(format!("estimated gamma {} exceeds 1", gamma.value));
            }
            theory::bound_kasync(&params.with_staleness(gamma.value, p0.value), f0_gap)
                .map(|s| overlay(BoundKind::KAsync, s))
                .map_err(|e| e.to_string())
        }
        (LrSchedule::StalenessCompensated { .. }, _) => {
            let params = params.with_staleness(0.0, p0.value);
            let mut acc: Option<Vec<f64>> = None;
            let mut first = None;
            for r in ok {
                let s = theory::bound_variable_lr(&r.eta, &params, f0_gap).map_err(|e| e.to_string())?;
                match &mut acc {
                    None => acc = Some(s.values.clone()),
                    Some(a) => a.iter_mut().zip(&s.values).for_each(|(a, b)| *a += b),
                }
                first.get_or_insert(s);
            }
            let mut series = first.expect("nonempty");
            let k = ok.len() as f64;
            series.values = acc.expect("nonempty").into_iter().map(|v| v / k).collect();
            Ok(overlay(BoundKind::VariableLr, series))
        }
    }
}

/// What a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Gradients per update.
    K,
    /// Mini-batch size; with `unit_compute_time` set, the shift of a
    /// shifted-exponential law scales with it.
    M,
    /// Fixed rate, or `η_max` of a compensated schedule.
    Eta,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(SweepAxis::K),
            "m" | "M" => Ok(SweepAxis::M),
            "eta" => Ok(SweepAxis::Eta),
            _ => Err(Error::Validation(vec![format!("unknown sweep axis {s:?} (expected K, m or eta)")])),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::K => "K",
            SweepAxis::M => "m",
            SweepAxis::Eta => "eta",
        })
    }
}

/// Copy of `cfg` with the sweep axis set to `value` in every variant.
pub fn sweep_point(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut out = cfg.clone();
    let as_count = |v: f64| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Validation(vec![format!("{axis} sweep needs positive integers, got {v}")]))
        }
    };
    match axis {
        SweepAxis::K => {
            let k = as_count(value)?;
            out.variants.iter_mut().for_each(|v| v.config.wait_for = k);
        }
        SweepAxis::M => {
            let m = as_count(value)?;
            out.variants.iter_mut().for_each(|v| v.config.batch_size = m);
            if let Some(unit) = cfg.unit_compute_time {
                let dist = cfg.distribution.as_ref().ok_or_else(|| Error::Validation(vec!["no distribution".into()]))?;
                let rate = match dist.kind() {
                    crate::runtime::DistributionKind::ShiftedExponential { rate, .. } => *rate,
                    _ => {
                        return Err(Error::Validation(vec![
                            "unit_compute_time needs a shifted_exponential distribution".into(),
                        ]))
                    }
                };
                out.distribution = Some(RuntimeDistribution::shifted_exponential(m as f64 * unit, rate)?);
            }
        }
        SweepAxis::Eta => {
            for v in &mut out.variants {
                v.config.schedule = match v.config.schedule {
                    LrSchedule::Fixed { .. } => LrSchedule::fixed(value)?,
                    LrSchedule::StalenessCompensated { c, .. } => LrSchedule::staleness_compensated(c, value)?,
                };
            }
        }
    }
    Ok(out)
}

/// One experiment per sweep value.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<(f64, ExperimentResult)>> {
    let points: Vec<ExperimentConfig> = values.iter().map(|&v| sweep_point(cfg, axis, v)).collect::<Result<_>>()?;
    let mut all = Vec::new();
    for p in &points {
        if let Err(Error::Validation(v)) = p.validate() {
            all.extend(v);
        }
    }
    if !all.is_empty() {
        return Err(Error::Validation(all));
    }
    values.iter().zip(&points).map(|(&v, p)| Ok((v, run_experiment(p)?))).collect()
}
