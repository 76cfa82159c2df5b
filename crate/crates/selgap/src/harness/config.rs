//! Experiment configuration: a JSON file with a documented key schema.
//! Every field has a default, so an empty object `{}` is a valid config.

use crate::error::{Error, Result};
use crate::losspred::FeatureMode;
use crate::models::{ModelSpec, TrainConfig};
use crate::synthdata::{GaussianMixtureTask, ShiftTransform, TwoMoonsTask};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// The data-generating task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskConfig {
    /// Two interleaved half-circles with Gaussian jitter.
    TwoMoons {
        noise_sigma: f64,
        #[serde(default = "default_n_grid")]
        n_grid: usize,
    },
    /// K-class Gaussian mixture with a shared covariance.
    Gaussian {
        means: Vec<[f64; 2]>,
        covariance: [[f64; 2]; 2],
        priors: Vec<f64>,
    },
}

fn default_n_grid() -> usize {
    64
}

impl TaskConfig {
    pub fn num_classes(&self) -> usize {
        match self {
            TaskConfig::TwoMoons { .. } => 2,
            TaskConfig::Gaussian { means, .. } => means.len(),
        }
    }

    pub fn moons(&self) -> Result<TwoMoonsTask> {
        match self {
            TaskConfig::TwoMoons { noise_sigma, n_grid } => TwoMoonsTask::new(*noise_sigma, *n_grid),
            TaskConfig::Gaussian { .. } => {
                Err(Error::Config("this command needs a two_moons task".into()))
            }
        }
    }

    pub fn gaussian(&self) -> Result<GaussianMixtureTask> {
        match self {
            TaskConfig::Gaussian { means, covariance, priors } => {
                GaussianMixtureTask::with_components(means.clone(), *covariance, priors.clone())
            }
            TaskConfig::TwoMoons { .. } => {
                Err(Error::Config("this command needs a gaussian task".into()))
            }
        }
    }
}

/// Model architecture entry; the input dimension is fixed by the 2-D tasks
/// and the class count by the task config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Logistic,
    Mlp { hidden: Vec<usize> },
}

impl ModelConfig {
    pub fn to_spec(&self, input_dim: usize, num_classes: usize) -> Result<ModelSpec> {
        match self {
            ModelConfig::Logistic => ModelSpec::logistic(input_dim, num_classes),
            ModelConfig::Mlp { hidden } => ModelSpec::mlp(input_dim, hidden.clone(), num_classes),
        }
    }
}

/// Score kinds nameable from a config (the oracle and loss-predictor heads
/// are built by the pipeline where they apply).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreConfig {
    Msp,
    NegSelfEntropy,
    EnsembleMeanMsp,
    EnsembleNegVariance,
    OracleEtaH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibratorConfig {
    Temperature,
    Isotonic,
    Histogram,
}

/// Full experiment configuration. All fields have defaults; command-line
/// `--seed`, `--out`, and `--delta` override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    /// Total samples drawn per seed, then split train/val/test.
    pub n_total: usize,
    /// Split fractions (train, val, test); must sum to 1.
    pub split: [f64; 3],
    pub models: Vec<ModelConfig>,
    pub scores: Vec<ScoreConfig>,
    pub calibrators: Vec<CalibratorConfig>,
    pub train: TrainConfig,
    pub coverage_grid: Vec<f64>,
    /// Noise levels for the two-moons noise sweep.
    pub sigmas: Vec<f64>,
    /// Shift names for the shift study (subset of
    /// identity/shear/rotation/translation).
    pub shifts: Vec<String>,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub ensemble_size: usize,
    pub ece_bins: usize,
    /// Anchor count for the two-moons posterior oracle.
    pub mc_samples: usize,
    pub lp_mode: FeatureMode,
    pub out_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: TaskConfig::TwoMoons { noise_sigma: 0.33, n_grid: 64 },
            // Sample sizes are a documented choice: 5000 points split
            // 60/20/20 gives 3000 train / 1000 val / 1000 test per seed.
            n_total: 5000,
            split: [0.6, 0.2, 0.2],
            models: vec![ModelConfig::Mlp { hidden: vec![32, 32] }],
            scores: vec![ScoreConfig::Msp],
            calibrators: vec![
                CalibratorConfig::Temperature,
                CalibratorConfig::Isotonic,
                CalibratorConfig::Histogram,
            ],
            train: TrainConfig::default(),
            coverage_grid: (1..=20).map(|i| i as f64 * 0.05).collect(),
            sigmas: vec![0.1, 0.33, 0.66, 1.5],
            shifts: vec![
                "identity".into(),
                "shear".into(),
                "rotation".into(),
                "translation".into(),
            ],
            seeds: vec![0, 1, 2, 3, 4],
            delta: 0.05,
            ensemble_size: 5,
            ece_bins: 15,
            mc_samples: 2000,
            lp_mode: FeatureMode::InputAware,
            out_dir: "runs".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if self.n_total < 10 {
            return Err(Error::Config("n_total must be at least 10".into()));
        }
        let sum: f64 = self.split.iter().sum();
        if self.split.iter().any(|&f| f <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split fractions must be positive and sum to 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("models must be nonempty".into()));
        }
        if self.coverage_grid.is_empty()
            || self.coverage_grid.iter().any(|&c| !(c > 0.0 && c <= 1.0))
        {
            return Err(Error::Config("coverage_grid must lie in (0, 1]".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config("delta must lie in (0, 1)".into()));
        }
        if self.ensemble_size < 2 {
            return Err(Error::Config("ensemble_size must be at least 2".into()));
        }
        for name in &self.shifts {
            shift_by_name(name)?;
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Stable 64-bit FNV-1a hash of the canonical JSON serialization,
    /// stamped on every output row for provenance.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

pub fn shift_by_name(name: &str) -> Result<ShiftTransform> {
    match name {
        "identity" => Ok(ShiftTransform::Identity),
        "shear" => Ok(ShiftTransform::standard_shear()),
        "rotation" => Ok(ShiftTransform::standard_rotation()),
        "translation" => Ok(ShiftTransform::standard_translation()),
        other => Err(Error::Config(format!("unknown shift `{other}`"))),
    }
}
