//! Objectives with known smoothness/convexity/noise constants, their
//! stochastic gradient oracles, and learning-rate schedules.

mod dataset;
mod logistic;
mod quadratic;
mod schedule;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{self, SimRng};

pub use dataset::{read_idx, read_labeled_csv, Dataset, IdxArray};
pub use logistic::LogisticObjective;
pub use quadratic::QuadraticObjective;
pub use schedule::LrSchedule;

/// Constants entering the convergence bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConstants {
    /// Lipschitz constant of the gradient.
    pub smoothness: f64,
    /// Strong-convexity parameter.
    pub strong_convexity: f64,
    /// Additive gradient-noise variance at mini-batch size 1.
    pub noise_variance: f64,
    /// Multiplicative variance scale at mini-batch size 1.
    pub multiplicative_variance: f64,
    /// Optimal value `F*`.
    pub optimal_value: f64,
}

/// A loss with a stochastic gradient oracle.
///
/// `stochastic_grad_into` must be unbiased and satisfy
/// `E||g - ∇F(w)||² <= noise_variance / m + multiplicative_variance / m * ||∇F(w)||²`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn loss(&self, w: &[f64]) -> f64;

    fn grad_into(&self, w: &[f64], out: &mut [f64]);

    fn stochastic_grad_into(&self, w: &[f64], batch_size: usize, rng: &mut SimRng, out: &mut [f64]);

    fn constants(&self) -> ObjectiveConstants;

    fn minimizer(&self) -> &[f64];

    /// Deterministic starting point for simulations.
    fn initial_point(&self) -> Vec<f64>;

    fn grad(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.grad_into(w, &mut g);
        g
    }

    fn stochastic_grad(&self, w: &[f64], batch_size: usize, rng: &mut SimRng) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.stochastic_grad_into(w, batch_size, rng, &mut g);
        g
    }

    fn gap(&self, w: &[f64]) -> f64 {
        self.loss(w) - self.constants().optimal_value
    }
}

/// Objective section of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "objective", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Quadratic {
        dim: usize,
        eigenvalues: Vec<f64>,
        sigma: f64,
        /// Multiplicative noise scale `M_G`; zero gives purely additive noise.
        #[serde(default)]
        multiplicative: f64,
    },
    Logistic {
        n_samples: usize,
        dim: usize,
        lambda: f64,
        data_seed: u64,
    },
    /// MNIST-style IDX image/label files, reduced to one-vs-rest.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        positive_class: u8,
        lambda: f64,
        #[serde(default)]
        max_samples: Option<usize>,
    },
    /// CSV rows of `label,feature,feature,...`, reduced to one-vs-rest.
    LabeledCsv {
        path: PathBuf,
        positive_class: f64,
        lambda: f64,
        #[serde(default)]
        max_samples: Option<usize>,
    },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Arc<dyn Objective>> {
        Ok(match self {
            ObjectiveSpec::Quadratic { dim, eigenvalues, sigma, multiplicative } => Arc::new(
                QuadraticObjective::with_multiplicative_noise(*dim, eigenvalues.clone(), *sigma, *multiplicative)?,
            ),
            ObjectiveSpec::Logistic { n_samples, dim, lambda, data_seed } => {
                let mut rng = rng::from_seed(*data_seed);
                Arc::new(LogisticObjective::synthetic(*n_samples, *dim, *lambda, &mut rng)?)
            }
            ObjectiveSpec::Idx { images, labels, positive_class, lambda, max_samples } => {
                let data = Dataset::from_idx(images, labels, *positive_class, *max_samples)?;
                Arc::new(LogisticObjective::from_dataset(data, *lambda)?)
            }
            ObjectiveSpec::LabeledCsv { path, positive_class, lambda, max_samples } => {
                let data = Dataset::from_labeled_csv(path, *positive_class, *max_samples)?;
                Arc::new(LogisticObjective::from_dataset(data, *lambda)?)
            }
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
