use rand_distr::{Distribution, StandardNormal};

use super::{Objective, ObjectiveConstants};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// `F(w) = ½ Σ_i λ_i w_i²` with minimizer `w* = 0` and `F* = 0`.
///
/// Stochastic gradients add isotropic Gaussian noise of total variance
/// `σ²/m`, and optionally a multiplicative term `∇F(w) · ζ · sqrt(M_G/m)`
/// with a scalar `ζ ~ N(0, 1)`, so the noise model meets its variance bound
/// with equality.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    eigenvalues: Vec<f64>,
    sigma: f64,
    multiplicative: f64,
    minimizer: Vec<f64>,
}

impl QuadraticObjective {
    pub fn new(dim: usize, eigenvalues: Vec<f64>, sigma: f64) -> Result<Self> {
        Self::with_multiplicative_noise(dim, eigenvalues, sigma, 0.0)
    }

    pub fn with_multiplicative_noise(dim: usize, eigenvalues: Vec<f64>, sigma: f64, multiplicative: f64) -> Result<Self> {
        if dim == 0 || eigenvalues.len() != dim {
            return Err(Error::InvalidObjective(format!(
                "expected {dim} eigenvalues, got {}",
                eigenvalues.len()
            )));
        }
        if let Some(bad) = eigenvalues.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::InvalidObjective(format!("eigenvalues must be > 0, got {bad}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidObjective(format!("sigma must be >= 0, got {sigma}")));
        }
        if !(multiplicative.is_finite() && multiplicative >= 0.0) {
            return Err(Error::InvalidObjective(format!(
                "multiplicative noise scale must be >= 0, got {multiplicative}"
            )));
        }
        Ok(QuadraticObjective { minimizer: vec![0.0; dim], eigenvalues, sigma, multiplicative })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `dim` eigenvalues evenly spaced over `[lo, hi]`.
    pub fn linspace_eigenvalues(dim: usize, lo: f64, hi: f64) -> Vec<f64> {
        if dim == 1 {
            return vec![lo];
        }
        (0..dim).map(|i| lo + (hi - lo) * i as f64 / (dim - 1) as f64).collect()
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn loss(&self, w: &[f64]) -> f64 {
        0.5 * self.eigenvalues.iter().zip(w).map(|(l, x)| l * x * x).sum::<f64>()
    }

    fn grad_into(&self, w: &[f64], out: &mut [f64]) {
        for ((o, l), x) in out.iter_mut().zip(&self.eigenvalues).zip(w) {
            *o = l * x;
        }
    }

    fn stochastic_grad_into(&self, w: &[f64], batch_size: usize, rng: &mut SimRng, out: &mut [f64]) {
        self.grad_into(w, out);
        let m = batch_size.max(1) as f64;
        if self.multiplicative > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            let scale = 1.0 + z * (self.multiplicative / m).sqrt();
            for o in out.iter_mut() {
                *o *= scale;
            }
        }
        if self.sigma > 0.0 {
            let sd = self.sigma / (m * self.dim() as f64).sqrt();
            for o in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *o += sd * z;
            }
        }
    }

    fn constants(&self) -> ObjectiveConstants {
        let max = self.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        ObjectiveConstants {
            smoothness: max,
            strong_convexity: min,
            noise_variance: self.sigma * self.sigma,
            multiplicative_variance: self.multiplicative,
            optimal_value: 0.0,
        }
    }

    fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![1.0; self.dim()]
    }
}
