//! Confidence scores for selective classification: the score function g of a
//! selective pair (h, g), where higher scores are accepted first.

use crate::error::{Error, Result};
use crate::io_util::fmt_f64;
use crate::losspred::{loss_features, LossPredictor};
use crate::models::{argmax, Ensemble, TrainedModel};
use crate::synthdata::{LabeledDataset, PosteriorOracle};
use std::path::Path;

/// The classifier side of a selective pair. An ensemble predicts by the
/// argmax of its mean member probabilities.
#[derive(Debug, Clone)]
pub enum Predictor {
    Single(TrainedModel),
    Ensemble(Ensemble),
}

impl Predictor {
    pub fn num_classes(&self) -> usize {
        match self {
            Predictor::Single(m) => m.spec().num_classes,
            Predictor::Ensemble(e) => e.spec().num_classes,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Predictor::Single(m) => m.spec().input_dim,
            Predictor::Ensemble(e) => e.spec().input_dim,
        }
    }

    /// Class probabilities: softmax output, or the member mean for ensembles.
    pub fn proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Predictor::Single(m) => m.predict_proba(x),
            Predictor::Ensemble(e) => e.mean_proba(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.proba(x)?))
    }

    pub fn as_single(&self) -> Option<&TrainedModel> {
        match self {
            Predictor::Single(m) => Some(m),
            Predictor::Ensemble(_) => None,
        }
    }
}

/// Score function kinds. All are oriented so that higher means more
/// confident, matching the accept-above-threshold convention.
#[derive(Debug, Clone)]
pub enum ScoreFunction {
    /// Maximum softmax probability of the model.
    Msp,
    /// 1 - SEP(x): the complement of the model's self-estimated 0-1 loss.
    /// Numerically equal to MSP; exposed separately because it is the
    /// loss-prediction baseline.
    NegSelfEntropy,
    /// Max of the ensemble's mean member probabilities.
    EnsembleMeanMsp,
    /// Negative variance across members of the predicted class probability.
    EnsembleNegVariance,
    /// The true correctness posterior of the prediction, from an oracle.
    OracleEtaH(PosteriorOracle),
    /// 1 - LP(phi(x)) for a trained loss predictor.
    LossPredictorHead(LossPredictor),
}

impl ScoreFunction {
    pub fn name(&self) -> &'static str {
        match self {
            ScoreFunction::Msp => "msp",
            ScoreFunction::NegSelfEntropy => "neg_self_entropy",
            ScoreFunction::EnsembleMeanMsp => "ensemble_mean_msp",
            ScoreFunction::EnsembleNegVariance => "ensemble_neg_variance",
            ScoreFunction::OracleEtaH(_) => "oracle_eta_h",
            ScoreFunction::LossPredictorHead(_) => "loss_predictor_head",
        }
    }
}

/// A classifier h together with the score g that ranks its predictions
/// (Definition: predict h(x) when g(x, h) clears the threshold, abstain
/// otherwise). Construction checks that the score's backing matches the
/// predictor.
#[derive(Debug, Clone)]
pub struct SelectivePair {
    predictor: Predictor,
    score: ScoreFunction,
}

impl SelectivePair {
    pub fn new(predictor: Predictor, score: ScoreFunction) -> Result<Self> {
        match (&score, &predictor) {
            (ScoreFunction::Msp | ScoreFunction::NegSelfEntropy, Predictor::Ensemble(_)) => {
                return Err(Error::invalid(
                    "score",
                    "msp/neg_self_entropy back onto a single model; use the ensemble score kinds",
                ));
            }
            (
                ScoreFunction::EnsembleMeanMsp | ScoreFunction::EnsembleNegVariance,
                Predictor::Single(_),
            ) => {
                return Err(Error::invalid("score", "ensemble scores need an ensemble predictor"));
            }
            _ => {}
        }
        Ok(SelectivePair { predictor, score })
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn score_fn(&self) -> &ScoreFunction {
        &self.score
    }

    /// Confidence score at `x`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match &self.score {
            ScoreFunction::Msp | ScoreFunction::NegSelfEntropy => {
                let p = self.predictor.proba(x)?;
                Ok(p[argmax(&p)])
            }
            ScoreFunction::EnsembleMeanMsp => {
                let p = self.predictor.proba(x)?;
                Ok(p[argmax(&p)])
            }
            ScoreFunction::EnsembleNegVariance => {
                let Predictor::Ensemble(e) = &self.predictor else {
                    return Err(Error::invalid("score", "ensemble score without ensemble"));
                };
                let mean = e.mean_proba(x)?;
                let j = argmax(&mean);
                let mut var = 0.0;
                for m in e.members() {
                    let p = m.predict_proba(x)?;
                    var += (p[j] - mean[j]) * (p[j] - mean[j]);
                }
                Ok(-(var / e.members().len() as f64))
            }
            ScoreFunction::OracleEtaH(oracle) => {
                let label = self.predictor.predict(x)?;
                let eta = oracle.posterior(x)?;
                if label >= eta.len() {
                    return Err(Error::MissingOracle(format!(
                        "oracle has {} classes, prediction was {label}",
                        eta.len()
                    )));
                }
                Ok(eta[label])
            }
            ScoreFunction::LossPredictorHead(lp) => {
                let phi = loss_features(lp.feature_mode(), &self.predictor, x)?;
                Ok(1.0 - lp.predict(&phi)?)
            }
        }
    }

    /// Per-sample (score, correct) rows in dataset order; correctness is the
    /// predictor's argmax against the label.
    pub fn score_dataset(&self, data: &LabeledDataset) -> Result<Vec<(f64, bool)>> {
        if data.is_empty() {
            return Err(Error::EmptySelection("scoring an empty dataset".into()));
        }
        data.features()
            .iter()
            .zip(data.labels())
            .map(|(x, &y)| Ok((self.score(x)?, self.predictor.predict(x)? == y)))
            .collect()
    }
}

/// Serialize scored rows as CSV: `score,correct`.
pub fn scored_to_csv(rows: &[(f64, bool)]) -> String {
    let mut out = String::from("score,correct\n");
    for (s, c) in rows {
        out.push_str(&fmt_f64(*s));
        out.push(',');
        out.push(if *c { '1' } else { '0' });
        out.push('\n');
    }
    out
}

pub fn write_scored_csv(rows: &[(f64, bool)], path: &Path) -> Result<()> {
    crate::io_util::write_atomic(path, &scored_to_csv(rows))
}
