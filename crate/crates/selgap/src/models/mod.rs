//! Small classifiers trained from scratch: multinomial logistic regression
//! and ReLU MLPs under minibatch SGD with momentum, plus deep ensembles.
//!
//! Training is a pure function of (spec, config, data): initialization and
//! batch order derive from the config seed, so identical inputs give
//! identical weight vectors.

pub(crate) mod net;

use crate::error::{Error, Result};
use crate::io_util::fmt_f64;
use crate::synthdata::{softmax, LabeledDataset};
use net::{LossKind, Layout, Workspace};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

/// Architecture of a classifier. Logistic regression is the zero-hidden-layer
/// case and must have an empty `hidden_sizes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn logistic(input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::validate(ModelKind::Logistic, input_dim, vec![], num_classes)
    }

    pub fn mlp(input_dim: usize, hidden_sizes: Vec<usize>, num_classes: usize) -> Result<Self> {
        Self::validate(ModelKind::Mlp, input_dim, hidden_sizes, num_classes)
    }

    fn validate(
        kind: ModelKind,
        input_dim: usize,
        hidden_sizes: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input_dim", "must be positive"));
        }
        if num_classes < 2 {
            return Err(Error::invalid("num_classes", "need at least two classes"));
        }
        if hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::invalid("hidden_sizes", "layer sizes must be positive"));
        }
        if kind == ModelKind::Logistic && !hidden_sizes.is_empty() {
            return Err(Error::invalid("hidden_sizes", "logistic models have no hidden layers"));
        }
        Ok(ModelSpec { kind, input_dim, hidden_sizes, activation: Activation::Relu, num_classes })
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(self.input_dim, &self.hidden_sizes, self.num_classes)
    }

    pub fn weight_count(&self) -> usize {
        self.layout().weight_count()
    }

    /// Short label for reports, e.g. `logistic` or `mlp[32,32]`.
    pub fn name(&self) -> String {
        match self.kind {
            ModelKind::Logistic => "logistic".to_string(),
            ModelKind::Mlp => {
                let sizes: Vec<String> = self.hidden_sizes.iter().map(ToString::to_string).collect();
                // No commas: the name is embedded in CSV fields and paths.
                format!("mlp[{}]", sizes.join("x"))
            }
        }
    }
}

/// SGD hyper-parameters. Fields omitted from a JSON config fall back to
/// these defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 128,
            weight_decay: 1e-4,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay", "must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A trained classifier: architecture, flat weight vector, and the training
/// loss recorded at the end of every epoch (full-data cross-entropy).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    spec: ModelSpec,
    weights: Vec<f64>,
    train_loss_trace: Vec<f64>,
    seed: u64,
}

impl TrainedModel {
    /// Wrap hand-set weights (no training trace).
    pub fn from_weights(spec: ModelSpec, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != spec.weight_count() {
            return Err(Error::invalid(
                "weights",
                format!("{} weights for a spec needing {}", weights.len(), spec.weight_count()),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights", "must be finite"));
        }
        Ok(TrainedModel { spec, weights, train_loss_trace: vec![], seed: 0 })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn train_loss_trace(&self) -> &[f64] {
        &self.train_loss_trace
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.train_loss_trace.last().copied()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.input_dim {
            return Err(Error::DimensionMismatch { expected: self.spec.input_dim, got: x.len() });
        }
        Ok(net::forward(&self.spec.layout(), &self.weights, x))
    }

    /// Softmax class probabilities at `x`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Argmax class (lowest index wins ties).
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Last hidden activations; for logistic models the logits themselves.
    pub fn representation(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.input_dim {
            return Err(Error::DimensionMismatch { expected: self.spec.input_dim, got: x.len() });
        }
        Ok(net::last_hidden(&self.spec.layout(), &self.weights, x))
    }

    /// Serialize to the versioned text format: one JSON header line with the
    /// spec, seed and epoch count, then one weight per line.
    pub fn to_text(&self) -> String {
        let header = ModelHeader {
            format: MODEL_FORMAT.to_string(),
            spec: self.spec.clone(),
            seed: self.seed,
            epochs: self.train_loss_trace.len(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for w in &self.weights {
            out.push_str(&fmt_f64(*w));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, path_hint: &str) -> Result<Self> {
        let malformed = |reason: String| Error::Malformed { path: path_hint.to_string(), reason };
        let mut lines = text.lines();
        let header_line = lines.next().ok_or_else(|| malformed("empty file".into()))?;
        let header: ModelHeader = serde_json::from_str(header_line)?;
        if header.format != MODEL_FORMAT {
            return Err(malformed(format!("unsupported format `{}`", header.format)));
        }
        let mut weights = Vec::with_capacity(header.spec.weight_count());
        for line in lines {
            if line.is_empty() {
                continue;
            }
            weights.push(line.parse::<f64>().map_err(|_| malformed(format!("bad weight `{line}`")))?);
        }
        let mut model = TrainedModel::from_weights(header.spec, weights)?;
        model.seed = header.seed;
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_text())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }
}

const MODEL_FORMAT: &str = "selgap-model-v1";

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    spec: ModelSpec,
    seed: u64,
    epochs: usize,
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean softmax cross-entropy of a weight vector on a dataset.
pub fn cross_entropy_loss(spec: &ModelSpec, weights: &[f64], data: &LabeledDataset) -> Result<f64> {
    check_compat(spec, weights, data)?;
    let targets: Vec<f64> = data.labels().iter().map(|&y| y as f64).collect();
    Ok(net::mean_loss(&spec.layout(), weights, data.features(), &targets, LossKind::CrossEntropy, None))
}

/// Mean cross-entropy and its gradient with respect to the weights.
pub fn cross_entropy_loss_and_grad(
    spec: &ModelSpec,
    weights: &[f64],
    data: &LabeledDataset,
) -> Result<(f64, Vec<f64>)> {
    check_compat(spec, weights, data)?;
    let layout = spec.layout();
    let targets: Vec<f64> = data.labels().iter().map(|&y| y as f64).collect();
    let batch: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; weights.len()];
    let mut ws = Workspace::new(&layout);
    let loss = net::batch_loss_grad(
        &layout,
        weights,
        data.features(),
        &targets,
        &batch,
        LossKind::CrossEntropy,
        &mut grad,
        &mut ws,
    );
    Ok((loss, grad))
}

fn check_compat(spec: &ModelSpec, weights: &[f64], data: &LabeledDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptySelection("training data".into()));
    }
    if data.dim() != spec.input_dim {
        return Err(Error::DimensionMismatch { expected: spec.input_dim, got: data.dim() });
    }
    if data.num_classes() > spec.num_classes {
        return Err(Error::invalid(
            "num_classes",
            format!("data has {} classes, spec allows {}", data.num_classes(), spec.num_classes),
        ));
    }
    if weights.len() != spec.weight_count() {
        return Err(Error::invalid("weights", "weight count does not match spec"));
    }
    Ok(())
}

/// He-style uniform initialization: U(-sqrt(6/fan_in), sqrt(6/fan_in)) for
/// the matrix entries, zero biases.
pub(crate) fn init_weights(layout: &Layout, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w = vec![0.0; layout.weight_count()];
    let mut off = 0;
    for l in 0..layout.n_layers() {
        let (n_in, n_out) = (layout.dims[l], layout.dims[l + 1]);
        let bound = (6.0 / n_in as f64).sqrt();
        for v in &mut w[off..off + n_in * n_out] {
            *v = rng.gen_range(-bound..bound);
        }
        off += n_in * n_out + n_out; // biases stay zero
    }
    w
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

pub(crate) fn sgd_train(
    layout: &Layout,
    init: Vec<f64>,
    xs: &[Vec<f64>],
    targets: &[f64],
    kind: LossKind,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut weights = init;
    let mut velocity = vec![0.0; weights.len()];
    let mut grad = vec![0.0; weights.len()];
    let mut ws = Workspace::new(layout);
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = epoch_rng(config.seed, epoch);
        let order = shuffled_indices(xs.len(), &mut rng);
        for batch in order.chunks(config.batch_size) {
            let loss = net::batch_loss_grad(layout, &weights, xs, targets, batch, kind, &mut grad, &mut ws);
            if !loss.is_finite() {
                return Err(Error::TrainDiverged { epoch });
            }
            for i in 0..weights.len() {
                let g = grad[i] + config.weight_decay * weights[i];
                velocity[i] = config.momentum * velocity[i] + g;
                weights[i] -= config.learning_rate * velocity[i];
            }
        }
        let epoch_loss = net::mean_loss(layout, &weights, xs, targets, kind, None);
        if !epoch_loss.is_finite() {
            return Err(Error::TrainDiverged { epoch });
        }
        trace.push(epoch_loss);
        on_epoch(epoch, &weights);
    }
    Ok((weights, trace))
}

/// Train a classifier by minibatch SGD with momentum and weight decay on the
/// mean cross-entropy. Batch order is reshuffled every epoch from a seed
/// derived from (config seed, epoch); the recorded trace holds the full-data
/// loss at the end of each epoch.
pub fn train(spec: &ModelSpec, config: &TrainConfig, data: &LabeledDataset) -> Result<TrainedModel> {
    config.validate()?;
    let layout = spec.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = init_weights(&layout, &mut rng);
    check_compat(spec, &init, data)?;
    let targets: Vec<f64> = data.labels().iter().map(|&y| y as f64).collect();
    let (weights, trace) = sgd_train(
        &layout,
        init,
        data.features(),
        &targets,
        LossKind::CrossEntropy,
        config,
        |_, _| {},
    )?;
    Ok(TrainedModel { spec: spec.clone(), weights, train_loss_trace: trace, seed: config.seed })
}

/// Fraction of samples the model labels correctly.
pub fn dataset_accuracy(model: &TrainedModel, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptySelection("accuracy of empty dataset".into()));
    }
    let mut correct = 0usize;
    for (x, &y) in data.features().iter().zip(data.labels()) {
        if model.predict(x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Several models of the same architecture trained from different seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<TrainedModel>,
}

impl Ensemble {
    /// Wrap pre-trained members; all specs must match and there must be at
    /// least two of them.
    pub fn from_members(members: Vec<TrainedModel>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::invalid("members", "an ensemble needs at least two members"));
        }
        let spec = members[0].spec().clone();
        if members.iter().any(|m| *m.spec() != spec) {
            return Err(Error::invalid("members", "all members must share one spec"));
        }
        Ok(Ensemble { members })
    }

    /// Test-only escape hatch: a single-member "ensemble" for consistency
    /// checks against the plain model scores.
    pub fn singleton(member: TrainedModel) -> Self {
        Ensemble { members: vec![member] }
    }

    pub fn members(&self) -> &[TrainedModel] {
        &self.members
    }

    pub fn spec(&self) -> &ModelSpec {
        self.members[0].spec()
    }

    /// Mean of the member class probabilities.
    pub fn mean_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut mean = vec![0.0; self.spec().num_classes];
        for m in &self.members {
            let p = m.predict_proba(x)?;
            for (acc, v) in mean.iter_mut().zip(&p) {
                *acc += v;
            }
        }
        let k = self.members.len() as f64;
        mean.iter_mut().for_each(|v| *v /= k);
        Ok(mean)
    }

    /// Argmax of the mean member probabilities.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.mean_proba(x)?))
    }
}

/// Train `m >= 2` members with seeds `seed, seed+1, ..`; members train
/// concurrently with independent derived RNG streams.
pub fn train_ensemble(
    spec: &ModelSpec,
    config: &TrainConfig,
    data: &LabeledDataset,
    m: usize,
) -> Result<Ensemble> {
    if m < 2 {
        return Err(Error::invalid("m", "an ensemble needs at least two members"));
    }
    let members: Result<Vec<TrainedModel>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let cfg = TrainConfig { seed: config.seed.wrapping_add(i as u64), ..*config };
            train(spec, &cfg, data)
        })
        .collect();
    Ensemble::from_members(members?)
}

/// Gap between the model's achieved training loss on `data` and a reference
/// lower bound on the achievable loss, clamped at zero.
pub fn optimization_slack(model: &TrainedModel, data: &LabeledDataset, reference_loss: f64) -> Result<f64> {
    let loss = cross_entropy_loss(model.spec(), model.weights(), data)?;
    Ok((loss - reference_loss).max(0.0))
}
