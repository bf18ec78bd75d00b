use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{dist_sq, norm_sq, Dataset, Objective, ObjectiveConstants};
use crate::error::{Error, Result};
use crate::rng::SimRng;

const OPTIMALITY_TOL: f64 = 1e-8;
const MAX_ORACLE_STEPS: usize = 2_000_000;

/// L2-regularized binary logistic regression,
/// `F(w) = (1/n) Σ log(1 + exp(-y_i x_iᵀw)) + λ||w||²`.
///
/// `w*` and `F*` come from a full-batch gradient-descent run to
/// `||∇F|| <= 1e-8`. The noise constants are fitted over a sample of points
/// around `w*`: `σ²` is the single-sample gradient variance at `w*` and `M_G`
/// the smallest slope that covers every other sampled point.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    data: Dataset,
    lambda: f64,
    minimizer: Vec<f64>,
    constants: ObjectiveConstants,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-z))` without overflow.
fn log_loss(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

impl LogisticObjective {
    /// Two Gaussian clusters centred at `±0.75/√d · 1` with unit covariance.
    pub fn synthetic(n_samples: usize, dim: usize, lambda: f64, rng: &mut SimRng) -> Result<Self> {
        if n_samples == 0 || dim == 0 {
            return Err(Error::InvalidObjective("logistic needs n_samples > 0 and dim > 0".into()));
        }
        let shift = 0.75 / (dim as f64).sqrt();
        let mut features = Vec::with_capacity(n_samples * dim);
        let mut labels = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            labels.push(y);
            for _ in 0..dim {
                let z: f64 = StandardNormal.sample(rng);
                features.push(y * shift + z);
            }
        }
        Self::from_dataset(Dataset { features, labels, dim }, lambda)
    }

    pub fn from_dataset(data: Dataset, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidObjective(format!("lambda must be > 0, got {lambda}")));
        }
        if data.is_empty() || data.features.len() != data.len() * data.dim {
            return Err(Error::InvalidObjective("dataset is empty or malformed".into()));
        }
        let max_row_sq = (0..data.len()).map(|i| norm_sq(data.row(i))).fold(0.0, f64::max);
        let smoothness = 2.0 * lambda + 0.25 * max_row_sq;
        let mut obj = LogisticObjective {
            minimizer: vec![0.0; data.dim],
            data,
            lambda,
            constants: ObjectiveConstants {
                smoothness,
                strong_convexity: 2.0 * lambda,
                noise_variance: 0.0,
                multiplicative_variance: 0.0,
                optimal_value: 0.0,
            },
        };
        obj.solve()?;
        obj.fit_noise_constants();
        Ok(obj)
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn solve(&mut self) -> Result<()> {
        let step = 1.0 / self.constants.smoothness;
        let mut w = vec![0.0; self.data.dim];
        let mut g = vec![0.0; self.data.dim];
        for _ in 0..MAX_ORACLE_STEPS {
            self.grad_into(&w, &mut g);
            if norm_sq(&g).sqrt() <= OPTIMALITY_TOL {
                self.constants.optimal_value = self.loss(&w);
                self.minimizer = w;
                return Ok(());
            }
            for (x, gi) in w.iter_mut().zip(&g) {
                *x -= step * gi;
            }
        }
        Err(Error::InvalidObjective("gradient-descent oracle did not reach ||grad|| <= 1e-8".into()))
    }

    fn sample_grad_into(&self, i: usize, w: &[f64], out: &mut [f64]) {
        let x = self.data.row(i);
        let y = self.data.labels[i];
        let z = y * super::dot(x, w);
        let coef = -y * sigmoid(-z);
        for ((o, xi), wi) in out.iter_mut().zip(x).zip(w) {
            *o = coef * xi + 2.0 * self.lambda * wi;
        }
    }

    /// Exact single-sample variance `(1/n) Σ ||g_i(w) - ∇F(w)||²`.
    pub fn single_sample_variance(&self, w: &[f64]) -> f64 {
        let full = self.grad(w);
        let mut gi = vec![0.0; self.data.dim];
        let n = self.data.len();
        (0..n)
            .map(|i| {
                self.sample_grad_into(i, w, &mut gi);
                dist_sq(&gi, &full)
            })
            .sum::<f64>()
            / n as f64
    }

    /// Points at which the noise constants are fitted: `w*` and 32
    /// deterministic perturbations of it at radii 0.1, 0.5, 1 and 2.
    pub fn noise_grid(&self) -> Vec<Vec<f64>> {
        let mut rng = crate::rng::from_seed(0x006e_6f69_7365);
        let mut points = vec![self.minimizer.clone()];
        for radius in [0.1, 0.5, 1.0, 2.0] {
            for _ in 0..8 {
                let dir: Vec<f64> = (0..self.data.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let scale = radius / norm_sq(&dir).sqrt().max(1e-300);
                points.push(self.minimizer.iter().zip(&dir).map(|(m, d)| m + scale * d).collect());
            }
        }
        points
    }

    fn fit_noise_constants(&mut self) {
        let sigma2 = self.single_sample_variance(&self.minimizer);
        let mut mg: f64 = 0.0;
        for w in self.noise_grid().iter().skip(1) {
            let g2 = norm_sq(&self.grad(w));
            if g2 > 0.0 {
                mg = mg.max((self.single_sample_variance(w) - sigma2) / g2);
            }
        }
        self.constants.noise_variance = sigma2;
        self.constants.multiplicative_variance = mg;
    }
}

impl Objective for LogisticObjective {
    fn dim(&self) -> usize {
        self.data.dim
    }

    fn loss(&self, w: &[f64]) -> f64 {
        let n = self.data.len();
        let data_term = (0..n)
            .map(|i| log_loss(self.data.labels[i] * super::dot(self.data.row(i), w)))
            .sum::<f64>()
            / n as f64;
        data_term + self.lambda * norm_sq(w)
    }

    fn grad_into(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let n = self.data.len();
        for i in 0..n {
            let x = self.data.row(i);
            let y = self.data.labels[i];
            let coef = -y * sigmoid(-y * super::dot(x, w)) / n as f64;
            for (o, xi) in out.iter_mut().zip(x) {
                *o += coef * xi;
            }
        }
        for (o, wi) in out.iter_mut().zip(w) {
            *o += 2.0 * self.lambda * wi;
        }
    }

    fn stochastic_grad_into(&self, w: &[f64], batch_size: usize, rng: &mut SimRng, out: &mut [f64]) {
        let m = batch_size.max(1);
        let n = self.data.len();
        let mut gi = vec![0.0; self.data.dim];
        out.iter_mut().for_each(|o| *o = 0.0);
        for _ in 0..m {
            let i = rng.random_range(0..n);
            self.sample_grad_into(i, w, &mut gi);
            for (o, g) in out.iter_mut().zip(&gi) {
                *o += g / m as f64;
            }
        }
    }

    fn constants(&self) -> ObjectiveConstants {
        self.constants
    }

    fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.data.dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn small() -> LogisticObjective {
        LogisticObjective::synthetic(200, 5, 0.01, &mut rng::from_seed(5)).unwrap()
    }

    #[test]
    fn oracle_reaches_optimality() {
        let obj = small();
        assert!(norm_sq(&obj.grad(obj.minimizer())).sqrt() <= 1e-6);
    }

    #[test]
    fn optimum_is_a_lower_bound() {
        let obj = small();
        let fstar = obj.constants().optimal_value;
        let mut r = rng::from_seed(8);
        for _ in 0..50 {
            let w: Vec<f64> = (0..5).map(|_| { let z: f64 = StandardNormal.sample(&mut r); 2.0 * z }).collect();
            assert!(obj.loss(&w) >= fstar);
        }
    }

    #[test]
    fn constants_are_consistent() {
        let obj = small();
        let k = obj.constants();
        assert_eq!(k.strong_convexity, 0.02);
        assert!(k.smoothness > k.strong_convexity);
        assert!(k.noise_variance > 0.0);
        assert!(k.multiplicative_variance >= 0.0);
    }

    #[test]
    fn rejects_nonpositive_regularizer() {
        assert!(LogisticObjective::synthetic(10, 2, 0.0, &mut rng::from_seed(1)).is_err());
    }

    #[test]
    fn log_loss_is_stable() {
        assert!((log_loss(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(log_loss(800.0) >= 0.0 && log_loss(800.0) < 1e-300);
        assert!((log_loss(-800.0) - 800.0).abs() < 1e-9);
    }
}
