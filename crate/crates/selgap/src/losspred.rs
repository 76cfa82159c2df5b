//! Per-example loss prediction: the self-entropy baseline, the squared-error
//! advantage of a loss predictor over it, multicalibration error over finite
//! weight classes, and the per-coverage check that the ranking regret is
//! controlled by the best attainable advantage, eps_rank <= sqrt(2 Adv*).

use crate::curves::{prefix_size, ranked_indices};
use crate::decomposition::eps_rank;
use crate::error::{Error, Result};
use crate::io_util::fmt_f64;
use crate::models::net::{forward, Layout, LossKind};
use crate::models::{init_weights, sgd_train, TrainConfig};
use crate::scoring::{Predictor, SelectivePair};
use crate::synthdata::{LabeledDataset, PosteriorOracle};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Which auxiliary features the loss predictor reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// phi = [SEP(x)]: only the model's own confidence.
    PredictionOnly,
    /// phi = [SEP(x), x..]: confidence plus the raw input.
    InputAware,
    /// phi = [SEP(x), x.., r(x)..] with r(x) the model's last hidden
    /// activations. Needs a single-model predictor.
    RepresentationAware,
}

impl FeatureMode {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureMode::PredictionOnly => "prediction_only",
            FeatureMode::InputAware => "input_aware",
            FeatureMode::RepresentationAware => "representation_aware",
        }
    }
}

/// Self-entropy predictor: the model's expected 0-1 loss given its own
/// prediction, 1 - max_j p_j (min{p, 1-p} in the binary case).
pub fn sep(probabilities: &[f64]) -> Result<f64> {
    crate::synthdata::validate_posterior(probabilities)?;
    let max = probabilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(1.0 - max)
}

/// Squared-error advantage of a loss predictor over the self-entropy
/// baseline: mean((loss - sep)^2) - mean((loss - lp)^2). Positive when the
/// predictor forecasts the instance-wise loss better than the model itself.
pub fn advantage(lp_values: &[f64], sep_values: &[f64], losses: &[f64]) -> Result<f64> {
    if lp_values.len() != sep_values.len() || lp_values.len() != losses.len() {
        return Err(Error::invalid("advantage", "input slices must have equal length"));
    }
    if lp_values.is_empty() {
        return Err(Error::EmptySelection("advantage of no samples".into()));
    }
    let n = losses.len() as f64;
    let mse_sep: f64 = sep_values.iter().zip(losses).map(|(s, l)| (l - s) * (l - s)).sum::<f64>() / n;
    let mse_lp: f64 = lp_values.iter().zip(losses).map(|(p, l)| (l - p) * (l - p)).sum::<f64>() / n;
    Ok(mse_sep - mse_lp)
}

/// Standard error of the advantage estimate (the mean of the per-sample
/// squared-error differences).
pub fn advantage_stderr(lp_values: &[f64], sep_values: &[f64], losses: &[f64]) -> Result<f64> {
    if lp_values.len() != sep_values.len() || lp_values.len() != losses.len() || lp_values.is_empty() {
        return Err(Error::invalid("advantage", "input slices must be nonempty and equal length"));
    }
    let diffs: Vec<f64> = lp_values
        .iter()
        .zip(sep_values)
        .zip(losses)
        .map(|((p, s), l)| (l - s) * (l - s) - (l - p) * (l - p))
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    Ok((var / n).sqrt())
}

/// Build the auxiliary features phi(x) for a predictor at one input.
pub fn loss_features(mode: FeatureMode, predictor: &Predictor, x: &[f64]) -> Result<Vec<f64>> {
    let probs = predictor.proba(x)?;
    let s = sep(&probs)?;
    match mode {
        FeatureMode::PredictionOnly => Ok(vec![s]),
        FeatureMode::InputAware => {
            let mut phi = Vec::with_capacity(1 + x.len());
            phi.push(s);
            phi.extend_from_slice(x);
            Ok(phi)
        }
        FeatureMode::RepresentationAware => {
            let model = predictor.as_single().ok_or_else(|| {
                Error::invalid("feature_mode", "representation-aware features need a single model")
            })?;
            let repr = model.representation(x)?;
            let mut phi = Vec::with_capacity(1 + x.len() + repr.len());
            phi.push(s);
            phi.extend_from_slice(x);
            phi.extend(repr);
            Ok(phi)
        }
    }
}

/// Loss features for every sample of a dataset.
pub fn loss_features_dataset(
    mode: FeatureMode,
    predictor: &Predictor,
    data: &LabeledDataset,
) -> Result<Vec<Vec<f64>>> {
    data.features().iter().map(|x| loss_features(mode, predictor, x)).collect()
}

const LP_HIDDEN: [usize; 2] = [32, 16];

/// Small MLP regressor mapping auxiliary features to an estimated 0-1 loss,
/// with the output clamped to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct LossPredictor {
    feature_mode: FeatureMode,
    input_dim: usize,
    hidden: Vec<usize>,
    weights: Vec<f64>,
}

impl LossPredictor {
    pub fn feature_mode(&self) -> FeatureMode {
        self.feature_mode
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input_dim, &self.hidden, 1)
    }

    /// Estimated loss for a feature row, in [0, 1].
    pub fn predict(&self, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: phi.len() });
        }
        let out = forward(&self.layout(), &self.weights, phi);
        Ok(out[0].clamp(0.0, 1.0))
    }
}

/// Advantage measured on the evaluation set after each training epoch,
/// with its shift relative to the first epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvantagePoint {
    pub epoch: usize,
    pub adv_test: f64,
    pub adv_delta: f64,
}

/// Evaluation set for the per-epoch advantage trace.
pub struct EvalSet<'a> {
    pub features: &'a [Vec<f64>],
    pub losses: &'a [f64],
    pub sep: &'a [f64],
}

/// Train a loss predictor: an MLP regressor (hidden [32, 16]) minimizing
/// mean squared error against the 0/1 losses, by the same minibatch SGD as
/// the classifiers. Deterministic given the config seed. The caller is
/// responsible for fitting on data disjoint from the base model's training
/// split.
pub fn train_loss_predictor(
    features: &[Vec<f64>],
    losses: &[f64],
    mode: FeatureMode,
    config: &TrainConfig,
) -> Result<LossPredictor> {
    Ok(fit(features, losses, mode, config, None)?.0)
}

/// As [`train_loss_predictor`], recording the advantage on `eval` after
/// every epoch.
pub fn train_loss_predictor_traced(
    features: &[Vec<f64>],
    losses: &[f64],
    mode: FeatureMode,
    config: &TrainConfig,
    eval: &EvalSet<'_>,
) -> Result<(LossPredictor, Vec<AdvantagePoint>)> {
    let (lp, trace) = fit(features, losses, mode, config, Some(eval))?;
    Ok((lp, trace))
}

fn fit(
    features: &[Vec<f64>],
    losses: &[f64],
    mode: FeatureMode,
    config: &TrainConfig,
    eval: Option<&EvalSet<'_>>,
) -> Result<(LossPredictor, Vec<AdvantagePoint>)> {
    config.validate()?;
    if features.is_empty() || features.len() != losses.len() {
        return Err(Error::invalid("features", "need one loss per nonempty feature row"));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("features", "rows must share a positive dimension"));
    }
    if losses.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::invalid("losses", "must lie in [0, 1]"));
    }
    let layout = Layout::new(dim, &LP_HIDDEN, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = init_weights(&layout, &mut rng);

    let mut trace = Vec::new();
    let hidden = LP_HIDDEN.to_vec();
    let (weights, _) = sgd_train(
        &layout,
        init,
        features,
        losses,
        LossKind::SquaredError,
        config,
        |epoch, w| {
            if let Some(ev) = eval {
                let lp_values: Vec<f64> = ev
                    .features
                    .iter()
                    .map(|phi| forward(&layout, w, phi)[0].clamp(0.0, 1.0))
                    .collect();
                let adv = advantage(&lp_values, ev.sep, ev.losses).unwrap_or(f64::NAN);
                let first = trace.first().map_or(adv, |p: &AdvantagePoint| p.adv_test);
                trace.push(AdvantagePoint { epoch, adv_test: adv, adv_delta: adv - first });
            }
        },
    )?;
    Ok((LossPredictor { feature_mode: mode, input_dim: dim, hidden, weights }, trace))
}

/// Serialize an advantage trace as CSV: `epoch,adv_test,adv_delta`.
pub fn advantage_trace_to_csv(trace: &[AdvantagePoint]) -> String {
    let mut out = String::from("epoch,adv_test,adv_delta\n");
    for p in trace {
        out.push_str(&format!("{},{},{}\n", p.epoch, fmt_f64(p.adv_test), fmt_f64(p.adv_delta)));
    }
    out
}

pub fn write_advantage_trace_csv(trace: &[AdvantagePoint], path: &Path) -> Result<()> {
    crate::io_util::write_atomic(path, &advantage_trace_to_csv(trace))
}

/// A finite class of bounded weighting functions, stored as per-sample value
/// vectors in [-1, 1]. Members are built from feature-quantile indicators,
/// acceptance-set difference indicators, and affine combinations.
#[derive(Debug, Clone, Default)]
pub struct WeightClass {
    names: Vec<String>,
    members: Vec<Vec<f64>>,
    n: Option<usize>,
}

impl WeightClass {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    /// Add a member from explicit per-sample values, checked to be bounded
    /// by 1 in absolute value and length-consistent with the class.
    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + 1e-12) {
            return Err(Error::invalid("weight", "values must lie in [-1, 1]"));
        }
        match self.n {
            Some(n) if n != values.len() => {
                return Err(Error::invalid("weight", "member length mismatch"));
            }
            None => self.n = Some(values.len()),
            _ => {}
        }
        self.names.push(name.into());
        self.members.push(values);
        Ok(())
    }

    /// Constant weight c(x) = v.
    pub fn push_constant(&mut self, v: f64, n: usize) -> Result<()> {
        self.push(format!("const_{v}"), vec![v; n])
    }

    /// Equal-mass quantile-bin indicators, `bins` per feature dimension.
    pub fn push_feature_quantile_bins(&mut self, features: &[Vec<f64>], bins: usize) -> Result<()> {
        if features.is_empty() || bins == 0 {
            return Err(Error::invalid("features", "need nonempty features and bins"));
        }
        let n = features.len();
        let dim = features[0].len();
        for d in 0..dim {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| features[i][d].total_cmp(&features[j][d]).then(i.cmp(&j)));
            for b in 0..bins {
                let lo = b * n / bins;
                let hi = (b + 1) * n / bins;
                let mut values = vec![0.0; n];
                for &i in &order[lo..hi] {
                    values[i] = 1.0;
                }
                self.push(format!("x{d}_q{b}"), values)?;
            }
        }
        Ok(())
    }

    /// Acceptance-set difference indicator at coverage `c`: +1 on the oracle
    /// set A*_c minus the realized set A_c, -1 on the reverse difference,
    /// 0 elsewhere.
    pub fn push_set_difference(&mut self, scores: &[f64], eta_h: &[f64], c: f64) -> Result<()> {
        if scores.len() != eta_h.len() || scores.is_empty() {
            return Err(Error::invalid("scores", "need matching nonempty scores and eta_h"));
        }
        let n = scores.len();
        let k = prefix_size(n, c)?;
        let by_score = ranked_indices(scores);
        let by_eta = ranked_indices(eta_h);
        let mut values = vec![0.0; n];
        for &i in &by_eta[..k] {
            values[i] += 1.0;
        }
        for &i in &by_score[..k] {
            values[i] -= 1.0;
        }
        self.push(format!("delta_c_{c}"), values)
    }

    /// Affine combination a * member_i + b * member_j, admissible only when
    /// it stays bounded by 1.
    pub fn push_affine(&mut self, i: usize, j: usize, a: f64, b: f64) -> Result<()> {
        if i >= self.len() || j >= self.len() {
            return Err(Error::invalid("affine", "member index out of range"));
        }
        let values: Vec<f64> = self.members[i]
            .iter()
            .zip(&self.members[j])
            .map(|(x, y)| a * x + b * y)
            .collect();
        let name = format!("affine_{a}*{}+{b}*{}", self.names[i], self.names[j]);
        self.push(name, values)
    }

    /// The default class: 16 equal-mass quantile indicators per feature
    /// dimension plus the set-difference indicators on the coverage grid.
    pub fn default_class(
        features: &[Vec<f64>],
        scores: &[f64],
        eta_h: &[f64],
        coverage_grid: &[f64],
    ) -> Result<Self> {
        let mut class = WeightClass::new();
        class.push_feature_quantile_bins(features, 16)?;
        for &c in coverage_grid {
            class.push_set_difference(scores, eta_h, c)?;
        }
        Ok(class)
    }
}

/// Multicalibration error: the largest absolute mean weighted residual over
/// the class, max_c |mean(residual_i * c_i)|.
pub fn mce(residuals: &[f64], class: &WeightClass) -> Result<f64> {
    if class.is_empty() {
        return Err(Error::EmptySelection("multicalibration over an empty class".into()));
    }
    let mut worst = 0.0_f64;
    for values in class.members() {
        if values.len() != residuals.len() {
            return Err(Error::invalid("residuals", "length does not match the weight class"));
        }
        let mean =
            residuals.iter().zip(values).map(|(r, w)| r * w).sum::<f64>() / residuals.len() as f64;
        worst = worst.max(mean.abs());
    }
    Ok(worst)
}

/// One coverage row of the advantage-controls-misranking check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorollaryRow {
    pub coverage: f64,
    pub eps_rank: f64,
    /// sqrt(2 Adv*) with Adv* the advantage of the squared-error-optimal
    /// predictor 1 - eta_h over the pair's own confidence baseline.
    pub bound: f64,
    /// Standard error of the eps_rank estimate (the two acceptance-set
    /// means treated as independent).
    pub stderr: f64,
    /// eps_rank <= bound + 2 stderr.
    pub holds: bool,
}

/// Check eps_rank(c) <= sqrt(2 Adv*) per coverage. Adv* is instantiated with
/// the oracle loss predictor LP* = 1 - eta_h, the squared-error optimum over
/// all measurable predictors, so its advantage is the attainable supremum.
/// The baseline loss estimate is 1 - score, the pair's own confidence read
/// as a loss forecast; for MSP-style pairs this is exactly the self-entropy
/// predictor.
pub fn corollary_check(
    data: &LabeledDataset,
    oracle: &PosteriorOracle,
    pair: &SelectivePair,
    coverage_grid: &[f64],
) -> Result<Vec<CorollaryRow>> {
    if coverage_grid.is_empty() {
        return Err(Error::invalid("coverage_grid", "must be nonempty"));
    }
    let scored = pair.score_dataset(data)?;
    let n = scored.len();
    let scores: Vec<f64> = scored.iter().map(|r| r.0).collect();
    let losses: Vec<f64> = scored.iter().map(|r| if r.1 { 0.0 } else { 1.0 }).collect();
    let baseline: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
    let eta = oracle.posterior_rows(data)?;
    let eta_h: Vec<f64> = data
        .features()
        .iter()
        .zip(&eta)
        .map(|(x, row)| {
            let label = pair.predictor().predict(x)?;
            row.get(label).copied().ok_or_else(|| {
                Error::MissingOracle(format!("posterior has {} classes, prediction {label}", row.len()))
            })
        })
        .collect::<Result<_>>()?;
    let lp_star: Vec<f64> = eta_h.iter().map(|e| 1.0 - e).collect();
    let adv_star = advantage(&lp_star, &baseline, &losses)?.max(0.0);
    let bound = (2.0 * adv_star).sqrt();

    let by_score = ranked_indices(&scores);
    let by_eta = ranked_indices(&eta_h);
    let set_stats = |order: &[usize], k: usize| {
        let vals: Vec<f64> = order[..k].iter().map(|&i| eta_h[i]).collect();
        let mean = vals.iter().sum::<f64>() / k as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k as f64;
        (mean, var)
    };

    let mut rows = Vec::with_capacity(coverage_grid.len());
    for &c in coverage_grid {
        let k = prefix_size(n, c)?;
        let e_rank = eps_rank(&eta_h, &scores, c)?;
        let (_, var_star) = set_stats(&by_eta, k);
        let (_, var_real) = set_stats(&by_score, k);
        let stderr = ((var_star + var_real) / k as f64).sqrt();
        rows.push(CorollaryRow {
            coverage: k as f64 / n as f64,
            eps_rank: e_rank,
            bound,
            stderr,
            holds: e_rank <= bound + 2.0 * stderr,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelSpec, TrainedModel};
    use crate::scoring::ScoreFunction;
    use crate::synthdata::{sample_gaussian_task, GaussianMixtureTask};
    use rand::Rng;

    #[test]
    fn sep_reference_values() {
        assert_eq!(sep(&[0.5, 0.5]).unwrap(), 0.5);
        assert_eq!(sep(&[1.0, 0.0]).unwrap(), 0.0);
        assert!((sep(&[0.8, 0.2]).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn advantage_identities() {
        let sep_vals = [0.3, 0.1, 0.4, 0.2];
        let losses = [1.0, 0.0, 0.0, 1.0];
        // LP identical to SEP: zero by definition.
        let adv = advantage(&sep_vals, &sep_vals, &losses).unwrap();
        assert!(adv.abs() < 1e-12);
        // LP equal to the realized loss: the full SEP squared error remains.
        let adv = advantage(&losses, &sep_vals, &losses).unwrap();
        let expect: f64 =
            sep_vals.iter().zip(&losses).map(|(s, l)| (l - s) * (l - s)).sum::<f64>() / 4.0;
        assert!((adv - expect).abs() < 1e-12);
    }

    fn symmetric_task() -> GaussianMixtureTask {
        GaussianMixtureTask::binary([-1.0, 0.0], [1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], 0.5).unwrap()
    }

    fn bayes_along_x() -> TrainedModel {
        let spec = ModelSpec::logistic(2, 2).unwrap();
        TrainedModel::from_weights(spec, vec![0.0, 0.0, 2.0, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn oracle_predictor_advantage_matches_brute_force() {
        // Adv(LP*) against the model's own SEP, re-estimated independently
        // from the identity Adv = E[(l-SEP)^2] - E[(l-(1-eta_h))^2] with a
        // fresh accumulation pass.
        let task = symmetric_task();
        let data = sample_gaussian_task(&task, 100_000, 21).unwrap();
        let model = bayes_along_x();
        let mut sep_vals = Vec::new();
        let mut lp_star = Vec::new();
        let mut losses = Vec::new();
        for (x, &y) in data.features().iter().zip(data.labels()) {
            let p = model.predict_proba(x).unwrap();
            sep_vals.push(sep(&p).unwrap());
            let eta = data.eta_true().unwrap()[losses.len()][model.predict(x).unwrap()];
            lp_star.push(1.0 - eta);
            losses.push(if model.predict(x).unwrap() == y { 0.0 } else { 1.0 });
        }
        let adv = advantage(&lp_star, &sep_vals, &losses).unwrap();
        // Independent accumulation in a different order.
        let mut acc = 0.0;
        for i in (0..losses.len()).rev() {
            let a = (losses[i] - sep_vals[i]).powi(2);
            let b = (losses[i] - lp_star[i]).powi(2);
            acc += a - b;
        }
        let brute = acc / losses.len() as f64;
        let se = advantage_stderr(&lp_star, &sep_vals, &losses).unwrap();
        assert!((adv - brute).abs() <= 2.0 * se + 1e-12, "{adv} vs {brute}");
        // The model's logistic link is steeper than the true posterior
        // (weight 2 vs margin coefficient 2 matches exactly here), so the
        // advantage is essentially zero for this well-specified model.
        assert!(adv.abs() < 0.01, "adv = {adv}");
    }

    #[test]
    fn constant_zero_losses_give_near_zero_predictor() {
        let features: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 200.0]).collect();
        let losses = vec![0.0; 200];
        let config = TrainConfig { epochs: 60, seed: 5, ..TrainConfig::default() };
        let lp = train_loss_predictor(&features, &losses, FeatureMode::PredictionOnly, &config).unwrap();
        for phi in &features {
            assert!(lp.predict(phi).unwrap() < 0.05);
        }
    }

    #[test]
    fn prediction_only_advantage_vanishes_when_sep_is_truthful() {
        // Losses drawn Bernoulli(sep): SEP is already the conditional mean,
        // so no predictor reading only SEP can do better.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 6000;
        let mut features = Vec::with_capacity(n);
        let mut sep_vals = Vec::with_capacity(n);
        let mut losses = Vec::with_capacity(n);
        for _ in 0..n {
            let s: f64 = rng.gen_range(0.0..0.5);
            features.push(vec![s]);
            sep_vals.push(s);
            losses.push(if rng.gen::<f64>() < s { 1.0 } else { 0.0 });
        }
        let split = n / 2;
        let config = TrainConfig { epochs: 80, seed: 6, ..TrainConfig::default() };
        let lp = train_loss_predictor(&features[..split], &losses[..split], FeatureMode::PredictionOnly, &config)
            .unwrap();
        let lp_values: Vec<f64> =
            features[split..].iter().map(|phi| lp.predict(phi).unwrap()).collect();
        let adv = advantage(&lp_values, &sep_vals[split..], &losses[split..]).unwrap();
        let se = advantage_stderr(&lp_values, &sep_vals[split..], &losses[split..]).unwrap();
        assert!(adv.abs() <= 2.0 * se, "adv {adv}, se {se}");
    }

    #[test]
    fn input_aware_features_beat_a_scrambled_confidence() {
        // The model's confidence is pure noise, but the loss is a simple
        // function of x: an input-aware predictor finds it.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 4000;
        let mut features = Vec::with_capacity(n);
        let mut sep_vals = Vec::with_capacity(n);
        let mut losses = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let s: f64 = rng.gen_range(0.0..0.5); // scrambled confidence
            features.push(vec![s, x]);
            sep_vals.push(s);
            losses.push(if x > 0.0 { 1.0 } else { 0.0 });
        }
        let split = n / 2;
        let config = TrainConfig { epochs: 120, seed: 7, ..TrainConfig::default() };
        let lp = train_loss_predictor(&features[..split], &losses[..split], FeatureMode::InputAware, &config)
            .unwrap();
        let lp_values: Vec<f64> =
            features[split..].iter().map(|phi| lp.predict(phi).unwrap()).collect();
        let adv = advantage(&lp_values, &sep_vals[split..], &losses[split..]).unwrap();
        let se = advantage_stderr(&lp_values, &sep_vals[split..], &losses[split..]).unwrap();
        assert!(adv > 2.0 * se, "adv {adv}, se {se}");
    }

    #[test]
    fn mce_basics() {
        let residuals = [0.5, -0.5, 0.25, -0.25];
        let mut class = WeightClass::new();
        class.push_constant(0.0, 4).unwrap();
        assert_eq!(mce(&residuals, &class).unwrap(), 0.0);
        // Centered residuals against the constant-one weight.
        class.push_constant(1.0, 4).unwrap();
        assert!(mce(&residuals, &class).unwrap() < 1e-12);
        // A discriminating member raises it.
        class.push("hand", vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!((mce(&residuals, &class).unwrap() - 0.375).abs() < 1e-12);
        assert!(mce(&residuals, &WeightClass::new()).is_err());
    }

    #[test]
    fn mce_never_decreases_with_more_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 64;
        let residuals: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut class = WeightClass::new();
        let mut last = 0.0;
        for m in 0..12 {
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            class.push(format!("m{m}"), values).unwrap();
            let now = mce(&residuals, &class).unwrap();
            assert!(now >= last - 1e-15);
            last = now;
        }
    }

    #[test]
    fn set_difference_member_certifies_misranking() {
        // All-zero predictions, loss = y, eta_h = 1 - y, scores by index.
        let y = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let eta_h: Vec<f64> = y.iter().map(|&v| 1.0 - v).collect();
        let scores: Vec<f64> = (0..10).map(|i| 1.0 - i as f64 / 10.0).collect();
        let c = 0.5;
        let e_rank = eps_rank(&eta_h, &scores, c).unwrap();
        assert!((e_rank - 0.6).abs() < 1e-12);
        let mut class = WeightClass::new();
        class.push_set_difference(&scores, &eta_h, c).unwrap();
        let residuals = y; // y - h with h = 0 everywhere
        let got = mce(&residuals, &class).unwrap();
        assert!(got >= c * e_rank - 1e-12, "mce {got} vs c*eps {e_rank}");
        assert!((got - c * e_rank).abs() < 1e-12, "this construction is tight");
    }

    #[test]
    fn corollary_holds_for_oracle_scores_and_msp() {
        let task = symmetric_task();
        let data = sample_gaussian_task(&task, 4000, 22).unwrap();
        let oracle = PosteriorOracle::Gaussian(task);
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();

        let oracle_pair = SelectivePair::new(
            Predictor::Single(bayes_along_x()),
            ScoreFunction::OracleEtaH(oracle.clone()),
        )
        .unwrap();
        for row in corollary_check(&data, &oracle, &oracle_pair, &grid).unwrap() {
            assert_eq!(row.eps_rank, 0.0);
            assert!(row.holds);
        }

        let msp_pair =
            SelectivePair::new(Predictor::Single(bayes_along_x()), ScoreFunction::Msp).unwrap();
        for row in corollary_check(&data, &oracle, &msp_pair, &grid).unwrap() {
            assert!(row.holds, "row {row:?}");
        }
    }

    #[test]
    fn corollary_absorbs_reversed_scores() {
        // Reversing the confidence makes the baseline loss estimate as bad
        // as possible, so the advantage bound grows with the misranking.
        let task = symmetric_task();
        let data = sample_gaussian_task(&task, 10_000, 23).unwrap();
        let model = bayes_along_x();
        let predictor = Predictor::Single(model);
        let scores: Vec<f64> = data
            .features()
            .iter()
            .map(|x| {
                let p = predictor.proba(x).unwrap();
                1.0 - p.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let losses: Vec<f64> = data
            .features()
            .iter()
            .zip(data.labels())
            .map(|(x, &y)| if predictor.predict(x).unwrap() == y { 0.0 } else { 1.0 })
            .collect();
        let eta_h: Vec<f64> = data
            .features()
            .iter()
            .zip(data.eta_true().unwrap())
            .map(|(x, row)| row[predictor.predict(x).unwrap()])
            .collect();
        let baseline: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
        let lp_star: Vec<f64> = eta_h.iter().map(|e| 1.0 - e).collect();
        let adv = advantage(&lp_star, &baseline, &losses).unwrap().max(0.0);
        let bound = (2.0 * adv).sqrt();
        for c in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let e = eps_rank(&eta_h, &scores, c).unwrap();
            assert!(e <= bound + 0.02, "c={c}: eps_rank {e} vs bound {bound}");
        }
        // And the misranking really is large at mid coverage.
        assert!(eps_rank(&eta_h, &scores, 0.5).unwrap() > 0.1);
    }

    #[test]
    fn trace_records_delta_from_first_epoch() {
        let features: Vec<Vec<f64>> = (0..100).map(|i| vec![(i % 10) as f64 / 10.0]).collect();
        let losses: Vec<f64> = (0..100).map(|i| if i % 10 >= 5 { 1.0 } else { 0.0 }).collect();
        let sep_vals = vec![0.5; 100];
        let eval = EvalSet { features: &features, losses: &losses, sep: &sep_vals };
        let config = TrainConfig { epochs: 10, seed: 1, ..TrainConfig::default() };
        let (_, trace) =
            train_loss_predictor_traced(&features, &losses, FeatureMode::PredictionOnly, &config, &eval)
                .unwrap();
        assert_eq!(trace.len(), 10);
        assert_eq!(trace[0].adv_delta, 0.0);
        for (i, p) in trace.iter().enumerate() {
            assert_eq!(p.epoch, i);
            assert!((p.adv_delta - (p.adv_test - trace[0].adv_test)).abs() < 1e-15);
        }
        let csv = advantage_trace_to_csv(&trace);
        assert!(csv.starts_with("epoch,adv_test,adv_delta\n"));
        assert_eq!(csv.lines().count(), 11);
    }
}
