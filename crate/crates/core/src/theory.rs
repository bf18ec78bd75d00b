//! Analytic runtime expectations, convergence upper bounds, and the
//! empirical estimators (`p₀`, `γ`) that feed them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimization::{dist_sq, norm_sq, Objective, ObjectiveConstants};
use crate::runtime::{Estimate, MonotonicityClass, OrderStatMethod, RuntimeDistribution};
use crate::sim::{Protocol, SimTrace, VariantConfig};

/// Symbols of the error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub eta: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub noise_variance: f64,
    pub multiplicative_variance: f64,
    pub batch_size: usize,
    pub wait_for: usize,
    /// Staleness coefficient γ in `[0, 1]`.
    pub gamma: f64,
    /// Lower bound on the probability that a gradient is fresh.
    pub p0: f64,
    /// Schedule constant `C`.
    pub schedule_c: f64,
    pub eta_max: f64,
    pub horizon: usize,
}

impl TheoryParams {
    /// Takes η, `C` and `η_max` from the schedule, the sizes and horizon
    /// from `config`, and sets γ = p₀ = 0.
    pub fn from_parts(constants: &ObjectiveConstants, config: &VariantConfig) -> Self {
        let (eta, schedule_c, eta_max) = match config.schedule {
            crate::optimization::LrSchedule::Fixed { eta } => (eta, 0.0, eta),
            crate::optimization::LrSchedule::StalenessCompensated { c, eta_max } => (eta_max, c, eta_max),
        };
        TheoryParams {
            eta,
            smoothness: constants.smoothness,
            strong_convexity: constants.strong_convexity,
            noise_variance: constants.noise_variance,
            multiplicative_variance: constants.multiplicative_variance,
            batch_size: config.batch_size,
            wait_for: config.wait_for,
            gamma: 0.0,
            p0: 0.0,
            schedule_c,
            eta_max,
            horizon: config.iterations,
        }
    }

    pub fn with_staleness(mut self, gamma: f64, p0: f64) -> Self {
        self.gamma = gamma;
        self.p0 = p0;
        self
    }

    /// `γ′ = 1 − γ + p₀/2`.
    pub fn gamma_prime(&self) -> f64 {
        1.0 - self.gamma + self.p0 / 2.0
    }

    fn km(&self) -> f64 {
        (self.wait_for * self.batch_size) as f64
    }

    /// Largest η admitted by the K-async bound: `1 / (2L (M_G/(Km) + 1/K))`.
    pub fn max_eta_kasync(&self) -> f64 {
        1.0 / (2.0 * self.smoothness * (self.multiplicative_variance / self.km() + 1.0 / self.wait_for as f64))
    }

    /// Largest η admitted by the K-sync bound: `1 / (2L (M_G/(Km) + 1))`.
    pub fn max_eta_ksync(&self) -> f64 {
        1.0 / (2.0 * self.smoothness * (self.multiplicative_variance / self.km() + 1.0))
    }

    /// Largest per-iteration η admitted by the variable-rate bound: `1 / (2L (M_G/m + 1))`.
    pub fn max_eta_variable(&self) -> f64 {
        1.0 / (2.0 * self.smoothness * (self.multiplicative_variance / self.batch_size as f64 + 1.0))
    }
}

/// Per-iteration decay of a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decay {
    Constant(f64),
    PerIteration(Vec<f64>),
}

/// Bound values `b_0, …, b_J` on `E[F(w_j)] − F*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSeries {
    pub values: Vec<f64>,
    pub floor: f64,
    pub decay: Decay,
    /// Per-iteration offsets `Δ_j` (variable-rate bound only).
    pub offsets: Option<Vec<f64>>,
    /// Accumulated offset after the last iteration (variable-rate bound only).
    pub accumulated_offset: Option<f64>,
}

impl BoundSeries {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("series has b_0")
    }
}

fn check_unit(name: &str, v: f64, bound: &'static str) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Precondition { bound, detail: format!("{name} = {v} is outside [0, 1]") })
    }
}

fn geometric_series(floor: f64, decay: f64, f0_gap: f64, horizon: usize) -> Vec<f64> {
    (0..=horizon).map(|j| floor + decay.powi(j as i32) * (f0_gap - floor)).collect()
}

/// Fixed-rate K-async bound:
/// `b_J = ηLσ²/(2cγ′Km) + (1 − ηcγ′)^J (F0 − ηLσ²/(2cγ′Km))`.
pub fn bound_kasync(params: &TheoryParams, f0_gap: f64) -> Result<BoundSeries> {
    const NAME: &str = "k-async error bound";
    let max = params.max_eta_kasync();
    if params.eta > max {
        return Err(Error::Precondition { bound: NAME, detail: format!("eta = {} exceeds {max}", params.eta) });
    }
    check_unit("gamma", params.gamma, NAME)?;
    check_unit("p0", params.p0, NAME)?;
    let gp = params.gamma_prime();
    let c = params.strong_convexity;
    let floor = params.eta * params.smoothness * params.noise_variance / (2.0 * c * gp * params.km());
    let decay = 1.0 - params.eta * c * gp;
    Ok(BoundSeries {
        values: geometric_series(floor, decay, f0_gap, params.horizon),
        floor,
        decay: Decay::Constant(decay),
        offsets: None,
        accumulated_offset: None,
    })
}

/// Fixed-rate K-sync bound:
/// `b_J = ηLσ²/(2cKm) + (1 − ηc)^J (F0 − ηLσ²/(2cKm))`.
pub fn bound_ksync(params: &TheoryParams, f0_gap: f64) -> Result<BoundSeries> {
    const NAME: &str = "k-sync error bound";
    let max = params.max_eta_ksync();
    if params.eta > max {
        return Err(Error::Precondition { bound: NAME, detail: format!("eta = {} exceeds {max}", params.eta) });
    }
    let c = params.strong_convexity;
    let floor = params.eta * params.smoothness * params.noise_variance / (2.0 * c * params.km());
    let decay = 1.0 - params.eta * c;
    Ok(BoundSeries {
        values: geometric_series(floor, decay, f0_gap, params.horizon),
        floor,
        decay: Decay::Constant(decay),
        offsets: None,
        accumulated_offset: None,
    })
}

/// Neumaier-compensated accumulator that can also be rescaled.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.carry *= f;
    }

    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Variable-rate bound for rates satisfying `η_j E||w_j − w_τ(j)||² <= C`.
///
/// With `ρ_j = η_j (1 + p₀/2) c` and `Δ_j = η_j² L σ²/(2m) + C L²/2`, the
/// series follows `b_{j+1} = (1 − ρ_j) b_j + Δ_j` from `b_0 = F0`, where
/// `η_j` is the rate of the update taking `w_j` to `w_{j+1}`.
pub fn bound_variable_lr(etas: &[f64], params: &TheoryParams, f0_gap: f64) -> Result<BoundSeries> {
    const NAME: &str = "variable learning-rate bound";
    let max = params.max_eta_variable();
    if let Some((j, eta)) = etas.iter().enumerate().find(|(_, e)| !(**e > 0.0 && **e <= max)) {
        return Err(Error::Precondition { bound: NAME, detail: format!("eta[{j}] = {eta} is outside (0, {max}]") });
    }
    if params.schedule_c.is_nan() || params.schedule_c < 0.0 {
        return Err(Error::Precondition { bound: NAME, detail: format!("C = {} is negative", params.schedule_c) });
    }
    check_unit("p0", params.p0, NAME)?;
    let l = params.smoothness;
    let m = params.batch_size as f64;
    let mut values = Vec::with_capacity(etas.len() + 1);
    let mut decays = Vec::with_capacity(etas.len());
    let mut offsets = Vec::with_capacity(etas.len());
    let mut product = 1.0;
    let mut offset = Compensated::default();
    values.push(f0_gap);
    for &eta in etas {
        let rho = eta * (1.0 + params.p0 / 2.0) * params.strong_convexity;
        let delta = eta * eta * l * params.noise_variance / (2.0 * m) + params.schedule_c * l * l / 2.0;
        product *= 1.0 - rho;
        offset.scale(1.0 - rho);
        offset.add(delta);
        decays.push(1.0 - rho);
        offsets.push(delta);
        values.push(product * f0_gap + offset.value());
    }
    Ok(BoundSeries {
        values,
        floor: offset.value(),
        decay: Decay::PerIteration(decays),
        offsets: Some(offsets),
        accumulated_offset: Some(offset.value()),
    })
}

/// Ergodic bound on `(1/(J+1)) Σ E||∇F(w_j)||²` for non-convex objectives:
/// `2 F0 / ((J+1) η γ′) + L η σ² / (K m γ′)`.
pub fn bound_nonconvex(params: &TheoryParams, f0_gap: f64, horizon: usize) -> Result<f64> {
    let gp = params.gamma_prime();
    if gp.is_nan() || gp <= 0.0 {
        return Err(Error::Precondition {
            bound: "non-convex ergodic bound",
            detail: format!("gamma' = {gp} must be > 0"),
        });
    }
    Ok(2.0 * f0_gap / ((horizon as f64 + 1.0) * params.eta * gp)
        + params.smoothness * params.eta * params.noise_variance / (params.km() * gp))
}

/// `E[T_sync] / E[T_async] = P · E[X_{P:P}] / E[X]`.
pub fn speedup_sync_over_async(dist: &RuntimeDistribution, learners: usize, method: OrderStatMethod) -> Result<Estimate> {
    let max = dist.expected_order_statistic(learners, learners, method)?;
    let scale = learners as f64 / dist.mean();
    Ok(Estimate { value: scale * max.value, stderr: scale * max.stderr })
}

/// Whether a runtime ratio or expectation is exact or one-sided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guarantee {
    Exact,
    UpperBound,
    /// Holds in the long-run limit.
    Limit,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioResult {
    pub ratio: Estimate,
    pub guarantee: Guarantee,
}

/// `E[T_K-async] / E[T_K-batch-async] = P · E[X_{K:P}] / (K · E[X])`.
/// Exact for memoryless service; an upper bound for new-longer-than-used.
pub fn ratio_kasync_over_kbatchasync(
    dist: &RuntimeDistribution,
    learners: usize,
    wait_for: usize,
    method: OrderStatMethod,
) -> Result<RatioResult> {
    let order = dist.expected_order_statistic(wait_for, learners, method)?;
    let scale = learners as f64 / (wait_for as f64 * dist.mean());
    let guarantee = match dist.classify_monotonicity() {
        MonotonicityClass::Memoryless => Guarantee::Exact,
        MonotonicityClass::NewLongerThanUsed => Guarantee::UpperBound,
        _ => Guarantee::None,
    };
    Ok(RatioResult { ratio: Estimate { value: scale * order.value, stderr: scale * order.stderr }, guarantee })
}

/// Predicted mean time per update for a protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimePrediction {
    pub value: f64,
    pub stderr: f64,
    pub guarantee: Guarantee,
}

/// `E[T]` per protocol: K-sync `E[X_{K:P}]`; K-batch-sync `K/(Pμ)` for
/// exponential service; K-async `E[X_{K:P}]` (exact when memoryless, upper
/// bound when new-longer-than-used); K-batch-async `K·E[X]/P` in the limit.
/// `None` where no result applies.
pub fn expected_runtime(
    protocol: Protocol,
    dist: &RuntimeDistribution,
    learners: usize,
    wait_for: usize,
    monte_carlo: OrderStatMethod,
) -> Result<Option<RuntimePrediction>> {
    let order = |method| -> Result<Estimate> {
        match dist.expected_order_statistic(wait_for, learners, OrderStatMethod::Analytic) {
            Ok(e) => Ok(e),
            Err(Error::UnsupportedMethod(_)) => dist.expected_order_statistic(wait_for, learners, method),
            Err(e) => Err(e),
        }
    };
    Ok(match protocol {
        Protocol::KSync => {
            let e = order(monte_carlo)?;
            Some(RuntimePrediction { value: e.value, stderr: e.stderr, guarantee: Guarantee::Exact })
        }
        Protocol::KBatchSync => dist.exponential_rate().map(|mu| RuntimePrediction {
            value: wait_for as f64 / (learners as f64 * mu),
            stderr: 0.0,
            guarantee: Guarantee::Exact,
        }),
        Protocol::KAsync => {
            let guarantee = match dist.classify_monotonicity() {
                MonotonicityClass::Memoryless => Guarantee::Exact,
                MonotonicityClass::NewLongerThanUsed => Guarantee::UpperBound,
                _ => return Ok(None),
            };
            let e = order(monte_carlo)?;
            Some(RuntimePrediction { value: e.value, stderr: e.stderr, guarantee })
        }
        Protocol::KBatchAsync => Some(RuntimePrediction {
            value: wait_for as f64 * dist.mean() / learners as f64,
            stderr: 0.0,
            guarantee: Guarantee::Limit,
        }),
    })
}

/// Empirical fraction of fresh gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P0Estimate {
    pub value: f64,
    pub contributions: usize,
    /// Synchronous protocol: every gradient is fresh by construction.
    pub degenerate: bool,
}

/// Minimum trace length for `estimate_p0`.
pub const P0_MIN_RECORDS: usize = 1_000;

/// Fraction of applied gradients with zero staleness. This is the marginal
/// frequency, used as a stand-in for the conditional lower bound.
pub fn estimate_p0(trace: &SimTrace) -> Result<P0Estimate> {
    if trace.config.protocol.is_synchronous() {
        return Ok(P0Estimate {
            value: 1.0,
            contributions: trace.records.iter().map(|r| r.staleness.len()).sum(),
            degenerate: true,
        });
    }
    if trace.len() < P0_MIN_RECORDS {
        return Err(Error::InsufficientData { needed: P0_MIN_RECORDS, got: trace.len() });
    }
    Ok(p0_from_traces(std::slice::from_ref(trace)))
}

/// Pooled zero-staleness fraction over several asynchronous traces.
pub fn p0_from_traces(traces: &[SimTrace]) -> P0Estimate {
    let (fresh, total) = traces
        .iter()
        .flat_map(|t| t.records.iter())
        .flat_map(|r| r.staleness.iter())
        .fold((0usize, 0usize), |(f, n), &s| (f + usize::from(s == 0), n + 1));
    P0Estimate { value: if total == 0 { 1.0 } else { fresh as f64 / total as f64 }, contributions: total, degenerate: false }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEstimate {
    pub value: f64,
    /// The estimate exceeds 1, outside the range the K-async bound assumes.
    pub hypothesis_violated: bool,
}

/// Smallest γ consistent with a run:
/// `Σ ||∇F(w_j) − ∇F(w_τ)||² / Σ ||∇F(w_j)||²` over every applied gradient.
pub fn estimate_gamma(trace: &SimTrace, objective: &dyn Objective) -> Result<GammaEstimate> {
    estimate_gamma_pooled(std::slice::from_ref(trace), objective)
}

/// `estimate_gamma` with numerator and denominator pooled over traces.
pub fn estimate_gamma_pooled(traces: &[SimTrace], objective: &dyn Objective) -> Result<GammaEstimate> {
    let mut num = 0.0;
    let mut den = 0.0;
    for trace in traces {
        let snaps = trace.snapshots.as_ref().ok_or(Error::MissingSnapshots)?;
        let grads: Vec<Vec<f64>> = snaps.iter().map(|w| objective.grad(w)).collect();
        for (j, rec) in trace.records.iter().enumerate() {
            let current = &grads[j];
            for &s in &rec.staleness {
                num += dist_sq(current, &grads[j - s]);
                den += norm_sq(current);
            }
        }
    }
    let value = if den > 0.0 { num / den } else { 0.0 };
    Ok(GammaEstimate { value, hypothesis_violated: value > 1.0 })
}
