//! Gaussian mixture tasks with an analytically known posterior.

use crate::error::{Error, Result};
use crate::synthdata::dataset::LabeledDataset;
use crate::synthdata::normal_pair;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A K-component 2-D Gaussian mixture with one component per class and a
/// shared covariance. The class posterior is available in closed form, so
/// every error term of the gap decomposition can be evaluated exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureTask {
    means: Vec<[f64; 2]>,
    covariance: [[f64; 2]; 2],
    priors: Vec<f64>,
    /// Lower Cholesky factor of the covariance.
    chol: [[f64; 2]; 2],
    /// Inverse covariance and log-determinant, cached for density queries.
    inv: [[f64; 2]; 2],
    log_det: f64,
}

impl GaussianMixtureTask {
    /// Two-class task: class 0 centered at `mean0`, class 1 at `mean1`,
    /// `class_prior` = Pr(Y = 1).
    pub fn binary(
        mean0: [f64; 2],
        mean1: [f64; 2],
        covariance: [[f64; 2]; 2],
        class_prior: f64,
    ) -> Result<Self> {
        if !(class_prior > 0.0 && class_prior < 1.0) {
            return Err(Error::invalid("class_prior", "must lie in (0, 1)"));
        }
        Self::with_components(vec![mean0, mean1], covariance, vec![1.0 - class_prior, class_prior])
    }

    /// General K-class mixture with one Gaussian per class.
    pub fn with_components(
        means: Vec<[f64; 2]>,
        covariance: [[f64; 2]; 2],
        priors: Vec<f64>,
    ) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::invalid("means", "need at least two components"));
        }
        if priors.len() != means.len() {
            return Err(Error::invalid("priors", "one prior per component"));
        }
        let sum: f64 = priors.iter().sum();
        if priors.iter().any(|&p| p <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("priors", "must be positive and sum to 1"));
        }
        let [[a, b], [c, d]] = covariance;
        if (b - c).abs() > 1e-12 {
            return Err(Error::invalid("covariance", "must be symmetric"));
        }
        let det = a * d - b * c;
        if a <= 0.0 || det <= 0.0 {
            return Err(Error::invalid("covariance", "must be positive definite"));
        }
        let l11 = a.sqrt();
        let l21 = b / l11;
        let l22 = (d - l21 * l21).sqrt();
        let chol = [[l11, 0.0], [l21, l22]];
        let inv = [[d / det, -b / det], [-b / det, a / det]];
        Ok(Self {
            means,
            covariance,
            priors,
            chol,
            inv,
            log_det: det.ln(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[[f64; 2]] {
        &self.means
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.covariance
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Log density of the class-`k` component at `x`.
    pub fn log_density(&self, k: usize, x: &[f64]) -> f64 {
        let dx = x[0] - self.means[k][0];
        let dy = x[1] - self.means[k][1];
        let quad = dx * (self.inv[0][0] * dx + self.inv[0][1] * dy)
            + dy * (self.inv[1][0] * dx + self.inv[1][1] * dy);
        -(2.0 * std::f64::consts::PI).ln() - 0.5 * self.log_det - 0.5 * quad
    }

    /// Exact class posterior at `x`, by Bayes' rule over the components.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: x.len() });
        }
        let logits: Vec<f64> = (0..self.num_classes())
            .map(|k| self.priors[k].ln() + self.log_density(k, x))
            .collect();
        Ok(softmax(&logits))
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Draw `n` labeled samples from the mixture. The posterior column is filled
/// analytically; output is a pure function of `(task, n, seed)`.
pub fn sample_gaussian_task(task: &GaussianMixtureTask, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut label = task.num_classes() - 1;
        for (k, &p) in task.priors.iter().enumerate() {
            acc += p;
            if u < acc {
                label = k;
                break;
            }
        }
        let (z0, z1) = normal_pair(&mut rng);
        let m = task.means[label];
        let x = [
            m[0] + task.chol[0][0] * z0,
            m[1] + task.chol[1][0] * z0 + task.chol[1][1] * z1,
        ];
        eta.push(task.posterior(&x)?);
        features.push(x.to_vec());
        labels.push(label);
    }
    LabeledDataset::new(features, labels, task.num_classes(), Some(eta), seed)
}
