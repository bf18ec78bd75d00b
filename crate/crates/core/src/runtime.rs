//! Service-time laws for one mini-batch computation on one learner, and
//! their summaries: means, expected order statistics and aging class.

use rand::Rng;
use rand_distr::{Distribution, Exp, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};

/// Parameters of a service-time law, as written in config files.
///
/// Serialized as a tagged record, e.g. `{ kind = "pareto", shape = 2.0, scale = 1.0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    Deterministic { value: f64 },
    Exponential { rate: f64 },
    ShiftedExponential { shift: f64, rate: f64 },
    Pareto { shape: f64, scale: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
}

/// A validated service-time distribution. All parameters are strictly
/// positive and the mean is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionKind", into = "DistributionKind")]
pub struct RuntimeDistribution {
    kind: DistributionKind,
}

impl From<RuntimeDistribution> for DistributionKind {
    fn from(d: RuntimeDistribution) -> Self {
        d.kind
    }
}

impl TryFrom<DistributionKind> for RuntimeDistribution {
    type Error = Error;

    fn try_from(kind: DistributionKind) -> Result<Self> {
        validate(&kind)?;
        Ok(RuntimeDistribution { kind })
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn validate(kind: &DistributionKind) -> Result<()> {
    match kind {
        DistributionKind::Deterministic { value } => positive("value", *value),
        DistributionKind::Exponential { rate } => positive("rate", *rate),
        DistributionKind::ShiftedExponential { shift, rate } => {
            positive("shift", *shift)?;
            positive("rate", *rate)
        }
        DistributionKind::Pareto { shape, scale } => {
            positive("scale", *scale)?;
            if !(shape.is_finite() && *shape > 1.0) {
                return Err(Error::InvalidDistribution(format!(
                    "pareto shape must be > 1 for a finite mean, got {shape}"
                )));
            }
            Ok(())
        }
        DistributionKind::HyperExponential { weights, rates } => {
            if weights.is_empty() || weights.len() != rates.len() {
                return Err(Error::InvalidDistribution(format!(
                    "hyper-exponential needs equal, nonzero numbers of weights and rates ({} vs {})",
                    weights.len(),
                    rates.len()
                )));
            }
            for &w in weights {
                positive("weight", w)?;
            }
            for &r in rates {
                positive("rate", r)?;
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidDistribution(format!(
                    "hyper-exponential weights sum to {total}, expected 1"
                )));
            }
            Ok(())
        }
    }
}

/// Stochastic aging class of a service-time law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotonicityClass {
    /// `P(U > u + t | U > t) <= P(U > u)` for all `t, u >= 0`.
    NewLongerThanUsed,
    /// `P(U > u + t | U > t) >= P(U > u)` for all `t, u >= 0`.
    NewShorterThanUsed,
    Memoryless,
    Unknown,
}

/// How to evaluate an expected order statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderStatMethod {
    Analytic,
    MonteCarlo { samples: usize, seed: u64 },
}

/// An expected-value estimate; `stderr` is zero for closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }
}

impl RuntimeDistribution {
    pub fn new(kind: DistributionKind) -> Result<Self> {
        Self::try_from(kind)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        Self::new(DistributionKind::Deterministic { value })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(DistributionKind::Exponential { rate })
    }

    pub fn shifted_exponential(shift: f64, rate: f64) -> Result<Self> {
        Self::new(DistributionKind::ShiftedExponential { shift, rate })
    }

    pub fn pareto(shape: f64, scale: f64) -> Result<Self> {
        Self::new(DistributionKind::Pareto { shape, scale })
    }

    pub fn hyper_exponential(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        Self::new(DistributionKind::HyperExponential { weights, rates })
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            DistributionKind::Deterministic { value } => format!("det({value})"),
            DistributionKind::Exponential { rate } => format!("exp({rate})"),
            DistributionKind::ShiftedExponential { shift, rate } => format!("{shift}+exp({rate})"),
            DistributionKind::Pareto { shape, scale } => format!("pareto({shape},{scale})"),
            DistributionKind::HyperExponential { weights, rates } => {
                format!("hyperexp({weights:?},{rates:?})")
            }
        }
    }

    /// Draws one service time.
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match &self.kind {
            DistributionKind::Deterministic { value } => *value,
            DistributionKind::Exponential { rate } => exp_draw(*rate, rng),
            DistributionKind::ShiftedExponential { shift, rate } => shift + exp_draw(*rate, rng),
            DistributionKind::Pareto { shape, scale } => Pareto::new(*scale, *shape)
                .expect("validated at construction")
                .sample(rng),
            DistributionKind::HyperExponential { weights, rates } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut branch = rates.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        branch = i;
                        break;
                    }
                }
                exp_draw(rates[branch], rng)
            }
        }
    }

    /// Closed-form `E[X]`.
    pub fn mean(&self) -> f64 {
        match &self.kind {
            DistributionKind::Deterministic { value } => *value,
            DistributionKind::Exponential { rate } => 1.0 / rate,
            DistributionKind::ShiftedExponential { shift, rate } => shift + 1.0 / rate,
            DistributionKind::Pareto { shape, scale } => shape * scale / (shape - 1.0),
            DistributionKind::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w / r).sum()
            }
        }
    }

    /// Survival function `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match &self.kind {
            DistributionKind::Deterministic { value } => {
                if x < *value {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionKind::Exponential { rate } => (-rate * x).exp(),
            DistributionKind::ShiftedExponential { shift, rate } => {
                if x < *shift {
                    1.0
                } else {
                    (-rate * (x - shift)).exp()
                }
            }
            DistributionKind::Pareto { shape, scale } => {
                if x < *scale {
                    1.0
                } else {
                    (scale / x).powf(*shape)
                }
            }
            DistributionKind::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * (-r * x).exp())
                .sum(),
        }
    }

    /// `E[X_{K:P}]`, the expected `k`-th smallest of `p` i.i.d. draws.
    ///
    /// The analytic route covers the exponential law (exact harmonic
    /// difference `(H_P - H_{P-K}) / rate`) and point masses.
    pub fn expected_order_statistic(&self, k: usize, p: usize, method: OrderStatMethod) -> Result<Estimate> {
        if k == 0 || k > p {
            return Err(Error::InvalidDistribution(format!(
                "order statistic needs 1 <= K <= P, got K={k}, P={p}"
            )));
        }
        match method {
            OrderStatMethod::Analytic => match &self.kind {
                DistributionKind::Exponential { rate } => {
                    Ok(Estimate::exact(harmonic_difference(p, k) / rate))
                }
                DistributionKind::Deterministic { value } => Ok(Estimate::exact(*value)),
                _ => Err(Error::UnsupportedMethod(self.name())),
            },
            OrderStatMethod::MonteCarlo { samples, seed } => {
                Ok(self.order_statistic_monte_carlo(k, p, samples, seed))
            }
        }
    }

    fn order_statistic_monte_carlo(&self, k: usize, p: usize, samples: usize, seed: u64) -> Estimate {
        let mut rng = rng::from_seed(seed);
        let mut draws = vec![0.0; p];
        let mut stats = RunningStats::default();
        for _ in 0..samples.max(1) {
            for d in draws.iter_mut() {
                *d = self.sample(&mut rng);
            }
            let (_, kth, _) = draws.select_nth_unstable_by(k - 1, f64::total_cmp);
            stats.push(*kth);
        }
        Estimate { value: stats.mean(), stderr: stats.stderr() }
    }

    /// Aging class. Tabulated for the exponential, shifted-exponential,
    /// hyper-exponential and deterministic laws; Pareto goes through the
    /// survival-function grid check.
    pub fn classify_monotonicity(&self) -> MonotonicityClass {
        match &self.kind {
            DistributionKind::Exponential { .. } => MonotonicityClass::Memoryless,
            DistributionKind::HyperExponential { rates, .. } => {
                if rates.windows(2).all(|w| w[0] == w[1]) {
                    MonotonicityClass::Memoryless
                } else {
                    MonotonicityClass::NewShorterThanUsed
                }
            }
            DistributionKind::ShiftedExponential { .. } | DistributionKind::Deterministic { .. } => {
                MonotonicityClass::NewLongerThanUsed
            }
            DistributionKind::Pareto { .. } => self.grid_monotonicity(),
        }
    }

    /// Checks the aging inequalities on the grid `t, u ∈ {0.1, 0.2, …, 10}`
    /// with tolerance 1e-9. Both holding uniformly means the grid cannot
    /// tell the law apart from a memoryless one.
    pub fn grid_monotonicity(&self) -> MonotonicityClass {
        const TOL: f64 = 1e-9;
        let grid: Vec<f64> = (1..=100).map(|i| i as f64 * 0.1).collect();
        let mut longer = true;
        let mut shorter = true;
        for &t in &grid {
            let st = self.survival(t);
            if st <= 0.0 {
                continue;
            }
            for &u in &grid {
                let residual = self.survival(u + t) / st;
                let fresh = self.survival(u);
                if residual > fresh + TOL {
                    longer = false;
                }
                if residual < fresh - TOL {
                    shorter = false;
                }
            }
        }
        match (longer, shorter) {
            (true, true) => MonotonicityClass::Memoryless,
            (true, false) => MonotonicityClass::NewLongerThanUsed,
            (false, true) => MonotonicityClass::NewShorterThanUsed,
            (false, false) => MonotonicityClass::Unknown,
        }
    }

    /// Rate of the exponential law, when this is one.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self.kind {
            DistributionKind::Exponential { rate } => Some(rate),
            _ => None,
        }
    }
}

fn exp_draw(rate: f64, rng: &mut SimRng) -> f64 {
    Exp::new(rate).expect("validated at construction").sample(rng)
}

/// `H_n = 1 + 1/2 + … + 1/n`, summed from the small terms up.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).rev().map(|i| 1.0 / i as f64).sum()
}

/// `H_P - H_{P-K} = Σ_{i=P-K+1}^{P} 1/i`, summed directly.
pub fn harmonic_difference(p: usize, k: usize) -> f64 {
    assert!(k <= p, "harmonic_difference needs K <= P");
    ((p - k + 1)..=p).rev().map(|i| 1.0 / i as f64).sum()
}

/// Log approximation `ln(P / (P-K)) / rate` of the exponential order
/// statistic; `K = P` uses `ln P`. Only for display next to exact values.
pub fn order_statistic_log_approx(rate: f64, k: usize, p: usize) -> f64 {
    let pf = p as f64;
    if k >= p {
        pf.ln() / rate
    } else {
        (pf / (p - k) as f64).ln() / rate
    }
}

/// Welford accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}
