//! Estimation of the gap's error terms on oracle-equipped data and the
//! per-coverage bound check
//! gap(c) <= eps_bayes(c) + eps_approx(c) + eps_rank(c) + eps_stat.
//!
//! All acceptance sets are exact top-k prefixes under the shared ranking
//! rule of [`crate::curves::ranked_indices`], applied identically to the
//! score ranking (A_c) and to the correctness-posterior ranking (A*_c).

use crate::curves::{oracle_bound, prefix_size, ranked_indices, stat_slack};
use crate::error::{Error, Result};
use crate::io_util::fmt_f64;
use crate::models::argmax;
use crate::scoring::{Predictor, SelectivePair};
use crate::synthdata::{LabeledDataset, PosteriorOracle};
use std::path::Path;

/// Probability that the predictor's label at `x` is correct, computed from
/// the true posterior: eta_{h(x)}(x). In the binary case this is eta(x) when
/// the prediction is class 1 and 1 - eta(x) when it is class 0.
pub fn correctness_posterior(
    oracle: &PosteriorOracle,
    predictor: &Predictor,
    x: &[f64],
) -> Result<f64> {
    let label = predictor.predict(x)?;
    let eta = oracle.posterior(x)?;
    eta.get(label).copied().ok_or_else(|| {
        Error::MissingOracle(format!("oracle covers {} classes, prediction was {label}", eta.len()))
    })
}

fn accepted_indices(accepted: &[bool]) -> Result<Vec<usize>> {
    let idx: Vec<usize> = accepted
        .iter()
        .enumerate()
        .filter_map(|(i, &a)| a.then_some(i))
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptySelection("no accepted samples".into()));
    }
    Ok(idx)
}

/// Irreducible-noise term: the mean of 1 - max_k eta_k(x) over the accepted
/// samples. Zero exactly when the accepted posteriors are deterministic.
pub fn eps_bayes(eta: &[Vec<f64>], accepted: &[bool]) -> Result<f64> {
    if eta.len() != accepted.len() {
        return Err(Error::DimensionMismatch { expected: eta.len(), got: accepted.len() });
    }
    let idx = accepted_indices(accepted)?;
    let sum: f64 = idx.iter().map(|&i| 1.0 - eta[i][argmax(&eta[i])]).sum();
    Ok(sum / idx.len() as f64)
}

/// Capacity term over the accepted samples.
///
/// Binary case, verbatim: the mean of |eta_h(x) - eta(x)| with
/// eta(x) = Pr(Y=1 | x). By construction this vanishes wherever the model
/// predicts class 1 (eta_h equals eta there) and equals |1 - 2 eta| where it
/// predicts class 0 - the term is asymmetric in the class labeling.
///
/// Multiclass case: the mean of max_k eta_k(x) - eta_{h(x)}(x), the excess
/// of the Bayes correctness posterior over the achieved one (the one-vs-rest
/// reduction of the same quantity).
pub fn eps_approx(eta: &[Vec<f64>], predicted: &[usize], accepted: &[bool]) -> Result<f64> {
    if eta.len() != predicted.len() || eta.len() != accepted.len() {
        return Err(Error::DimensionMismatch { expected: eta.len(), got: predicted.len().min(accepted.len()) });
    }
    let idx = accepted_indices(accepted)?;
    let num_classes = eta[idx[0]].len();
    let sum: f64 = if num_classes == 2 {
        idx.iter()
            .map(|&i| {
                let eta1 = eta[i][1];
                let eta_h = if predicted[i] == 1 { eta1 } else { 1.0 - eta1 };
                (eta_h - eta1).abs()
            })
            .sum()
    } else {
        idx.iter()
            .map(|&i| {
                let best = eta[i][argmax(&eta[i])];
                let eta_h = eta[i][predicted[i]];
                best - eta_h
            })
            .sum()
    };
    Ok(sum / idx.len() as f64)
}

/// Ranking regret at coverage `c`: the mean correctness posterior over the
/// oracle acceptance set A*_c (top-k by eta_h) minus the mean over the
/// realized acceptance set A_c (top-k by score), both of size ceil(c n) and
/// both ranked with the shared tie rule.
pub fn eps_rank(eta_h: &[f64], scores: &[f64], c: f64) -> Result<f64> {
    if eta_h.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: eta_h.len(), got: scores.len() });
    }
    if eta_h.is_empty() {
        return Err(Error::EmptySelection("eps_rank of no samples".into()));
    }
    let k = prefix_size(eta_h.len(), c)?;
    let by_score = ranked_indices(scores);
    let by_eta = ranked_indices(eta_h);
    let mean = |idx: &[usize]| idx[..k].iter().map(|&i| eta_h[i]).sum::<f64>() / k as f64;
    Ok(mean(&by_eta) - mean(&by_score))
}

/// Mass mis-ordered at coverage `c`: the fraction of samples in A*_c but not
/// A_c plus the fraction in A_c but not A*_c. Zero exactly when the two
/// acceptance sets coincide.
pub fn d_rank(scores: &[f64], eta_h: &[f64], c: f64) -> Result<f64> {
    if eta_h.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), got: eta_h.len() });
    }
    if scores.is_empty() {
        return Err(Error::EmptySelection("d_rank of no samples".into()));
    }
    let n = scores.len();
    let k = prefix_size(n, c)?;
    let by_score = ranked_indices(scores);
    let by_eta = ranked_indices(eta_h);
    let mut in_a = vec![false; n];
    for &i in &by_score[..k] {
        in_a[i] = true;
    }
    let mut only_star = 0usize;
    for &i in &by_eta[..k] {
        if !in_a[i] {
            only_star += 1;
        }
    }
    // |A* \ A| = |A \ A*| since both sets have size k.
    Ok(2.0 * only_star as f64 / n as f64)
}

/// One coverage row of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionRow {
    /// Realized prefix coverage k/n for k = ceil(c n).
    pub coverage: f64,
    pub gap: f64,
    pub eps_bayes: f64,
    pub eps_approx: f64,
    pub eps_rank: f64,
    pub d_rank: f64,
    pub stat_slack: f64,
    /// eps_bayes + eps_approx + eps_rank + stat_slack.
    pub bound_rhs: f64,
    /// gap <= bound_rhs.
    pub holds: bool,
}

impl DecompositionRow {
    /// Residual slack diagnostic: the part of the gap the intrinsic terms do
    /// not cover, clamped at zero. Not a bound term.
    pub fn residual_slack(&self) -> f64 {
        (self.gap - self.bound_rhs).max(0.0)
    }
}

/// Per-coverage gap decomposition and bound verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct GapDecomposition {
    rows: Vec<DecompositionRow>,
    delta: f64,
    n: usize,
}

impl GapDecomposition {
    pub fn rows(&self) -> &[DecompositionRow] {
        &self.rows
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fraction of rows whose bound verdict is true.
    pub fn holds_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        self.rows.iter().filter(|r| r.holds).count() as f64 / self.rows.len() as f64
    }

    /// Serialize as CSV:
    /// `coverage,gap,eps_bayes,eps_approx,eps_rank,d_rank,eps_stat,bound_rhs,holds`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("coverage,gap,eps_bayes,eps_approx,eps_rank,d_rank,eps_stat,bound_rhs,holds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                fmt_f64(r.coverage),
                fmt_f64(r.gap),
                fmt_f64(r.eps_bayes),
                fmt_f64(r.eps_approx),
                fmt_f64(r.eps_rank),
                fmt_f64(r.d_rank),
                fmt_f64(r.stat_slack),
                fmt_f64(r.bound_rhs),
                r.holds,
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_csv())
    }
}

/// Decomposition from precomputed per-sample quantities. `eta` rows are the
/// true posteriors, `predicted` the model labels, `scores`/`correct` the
/// selective pair's outputs. The gap and every error term at a grid point
/// are evaluated on the same top-k acceptance set.
pub fn decompose_scored(
    scores: &[f64],
    correct: &[bool],
    eta: &[Vec<f64>],
    predicted: &[usize],
    coverage_grid: &[f64],
    delta: f64,
) -> Result<GapDecomposition> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::EmptySelection("decomposition of no samples".into()));
    }
    if correct.len() != n || eta.len() != n || predicted.len() != n {
        return Err(Error::invalid("inputs", "per-sample arrays must have equal length"));
    }
    if coverage_grid.is_empty() {
        return Err(Error::invalid("coverage_grid", "must be nonempty"));
    }
    let slack = stat_slack(n, delta)?;
    let eta_h: Vec<f64> = eta
        .iter()
        .zip(predicted)
        .map(|(row, &p)| {
            row.get(p).copied().ok_or_else(|| {
                Error::MissingOracle(format!("posterior row has {} classes, prediction was {p}", row.len()))
            })
        })
        .collect::<Result<_>>()?;
    let order = ranked_indices(scores);
    let a_full = correct.iter().filter(|&&c| c).count() as f64 / n as f64;

    let mut rows = Vec::with_capacity(coverage_grid.len());
    for &c in coverage_grid {
        let k = prefix_size(n, c)?;
        let realized_cov = k as f64 / n as f64;
        let mut accepted = vec![false; n];
        let mut hits = 0usize;
        for &i in &order[..k] {
            accepted[i] = true;
            if correct[i] {
                hits += 1;
            }
        }
        let realized_acc = hits as f64 / k as f64;
        let gap = oracle_bound(a_full, realized_cov)? - realized_acc;
        let e_bayes = eps_bayes(eta, &accepted)?;
        let e_approx = eps_approx(eta, predicted, &accepted)?;
        let e_rank = eps_rank(&eta_h, scores, c)?;
        let d = d_rank(scores, &eta_h, c)?;
        let bound_rhs = e_bayes + e_approx + e_rank + slack;
        rows.push(DecompositionRow {
            coverage: realized_cov,
            gap,
            eps_bayes: e_bayes,
            eps_approx: e_approx,
            eps_rank: e_rank,
            d_rank: d,
            stat_slack: slack,
            bound_rhs,
            holds: gap <= bound_rhs,
        });
    }
    Ok(GapDecomposition { rows, delta, n })
}

/// Full-pipeline decomposition: scores and predictions from the pair, true
/// posteriors from the oracle. The coverage grid must lie in (0, 1].
pub fn decompose(
    data: &LabeledDataset,
    oracle: &PosteriorOracle,
    pair: &SelectivePair,
    coverage_grid: &[f64],
    delta: f64,
) -> Result<GapDecomposition> {
    let scored = pair.score_dataset(data)?;
    let scores: Vec<f64> = scored.iter().map(|r| r.0).collect();
    let correct: Vec<bool> = scored.iter().map(|r| r.1).collect();
    let eta = oracle.posterior_rows(data)?;
    let predicted: Vec<usize> = data
        .features()
        .iter()
        .map(|x| pair.predictor().predict(x))
        .collect::<Result<_>>()?;
    decompose_scored(&scores, &correct, &eta, &predicted, coverage_grid, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train, ModelSpec, TrainConfig, TrainedModel};
    use crate::scoring::ScoreFunction;
    use crate::synthdata::{sample_gaussian_task, GaussianMixtureTask};

    fn symmetric_task() -> GaussianMixtureTask {
        GaussianMixtureTask::binary([-1.0, 0.0], [1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], 0.5).unwrap()
    }

    fn bayes_along_x() -> TrainedModel {
        let spec = ModelSpec::logistic(2, 2).unwrap();
        TrainedModel::from_weights(spec, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn correctness_posterior_is_piecewise() {
        let oracle = PosteriorOracle::Gaussian(symmetric_task());
        // eta1 = 0.7 at x0 = ln(7/3)/2.
        let x = [(7.0_f64 / 3.0).ln() / 2.0, 0.0];
        let up = Predictor::Single(
            TrainedModel::from_weights(
                ModelSpec::logistic(2, 2).unwrap(),
                vec![0.0, 0.0, 0.0, 0.0, -9.0, 9.0],
            )
            .unwrap(),
        );
        let down = Predictor::Single(
            TrainedModel::from_weights(
                ModelSpec::logistic(2, 2).unwrap(),
                vec![0.0, 0.0, 0.0, 0.0, 9.0, -9.0],
            )
            .unwrap(),
        );
        assert!((correctness_posterior(&oracle, &up, &x).unwrap() - 0.7).abs() < 1e-9);
        assert!((correctness_posterior(&oracle, &down, &x).unwrap() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn bayes_predictor_has_majority_correctness() {
        let oracle = PosteriorOracle::Gaussian(symmetric_task());
        let bayes = Predictor::Single(bayes_along_x());
        let data = sample_gaussian_task(&symmetric_task(), 200, 0).unwrap();
        for x in data.features() {
            assert!(correctness_posterior(&oracle, &bayes, x).unwrap() >= 0.5 - 1e-12);
        }
    }

    #[test]
    fn eps_bayes_extremes() {
        let half = vec![vec![0.5, 0.5]; 4];
        let mask = vec![true; 4];
        assert_eq!(eps_bayes(&half, &mask).unwrap(), 0.5);
        let pure = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(eps_bayes(&pure, &[true, true]).unwrap(), 0.0);
        assert!(eps_bayes(&pure, &[false, false]).is_err());
    }

    #[test]
    fn eps_approx_follows_the_stated_formula() {
        let eta = vec![vec![0.3, 0.7], vec![0.9, 0.1], vec![0.4, 0.6]];
        let mask = vec![true; 3];
        // Predicting class 1 everywhere: eta_h = eta1, so the term is 0.
        assert_eq!(eps_approx(&eta, &[1, 1, 1], &mask).unwrap(), 0.0);
        // Predicting class 0 everywhere: mean |1 - 2 eta1|.
        let expect = ((1.0_f64 - 1.4).abs() + (1.0_f64 - 0.2).abs() + (1.0_f64 - 1.2).abs()) / 3.0;
        assert!((eps_approx(&eta, &[0, 0, 0], &mask).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn eps_approx_full_coverage_matches_brute_force() {
        // Independent re-estimation of the class-0 branch on fresh samples.
        let task = symmetric_task();
        let data = sample_gaussian_task(&task, 100_000, 3).unwrap();
        let model = bayes_along_x();
        let predicted: Vec<usize> =
            data.features().iter().map(|x| model.predict(x).unwrap()).collect();
        let eta = data.eta_true().unwrap().to_vec();
        let mask = vec![true; data.len()];
        let ours = eps_approx(&eta, &predicted, &mask).unwrap();
        let brute: f64 = data
            .features()
            .iter()
            .zip(&eta)
            .map(|(x, row)| if x[0] < 0.0 { (1.0 - 2.0 * row[1]).abs() } else { 0.0 })
            .sum::<f64>()
            / data.len() as f64;
        // Same samples, so agreement is exact up to summation order.
        assert!((ours - brute).abs() < 1e-12, "{ours} vs {brute}");
    }

    #[test]
    fn eps_rank_zero_when_scores_equal_eta_h() {
        let eta_h = vec![0.9, 0.8, 0.7, 0.2, 0.4];
        for c in [0.2, 0.4, 0.6, 1.0] {
            assert_eq!(eps_rank(&eta_h, &eta_h, c).unwrap(), 0.0);
        }
    }

    #[test]
    fn eps_rank_reversed_enumeration() {
        let eta_h = vec![0.9, 0.8, 0.2, 0.1];
        let scores: Vec<f64> = eta_h.iter().map(|v| -v).collect();
        let e = eps_rank(&eta_h, &scores, 0.5).unwrap();
        assert!((e - 0.7).abs() < 1e-15, "eps_rank = {e}");
    }

    #[test]
    fn d_rank_enumeration() {
        let eta_h = vec![0.9, 0.8, 0.2, 0.1];
        assert_eq!(d_rank(&eta_h, &eta_h, 0.5).unwrap(), 0.0);
        let reversed: Vec<f64> = eta_h.iter().map(|v| -v).collect();
        assert_eq!(d_rank(&reversed, &eta_h, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn ideal_regime_rows_are_all_zero() {
        // Far-separated task: posteriors are numerically 0/1, the linear
        // predictor is Bayes, the score is the true correctness posterior.
        // Gap, Bayes noise, and ranking regret all vanish. The capacity term
        // does not: as defined, |eta_h - eta| equals 1 on noiseless points
        // the model (correctly) labels class 0, so it measures the fraction
        // of accepted class-0 predictions here. The bound only loosens.
        let task = GaussianMixtureTask::binary(
            [-50.0, 0.0],
            [50.0, 0.0],
            [[1.0, 0.0], [0.0, 1.0]],
            0.5,
        )
        .unwrap();
        let data = sample_gaussian_task(&task, 400, 1).unwrap();
        let oracle = PosteriorOracle::Gaussian(task);
        let pair = SelectivePair::new(
            Predictor::Single(bayes_along_x()),
            ScoreFunction::OracleEtaH(oracle.clone()),
        )
        .unwrap();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let dec = decompose(&data, &oracle, &pair, &grid, 0.05).unwrap();
        let n = data.len();
        for row in dec.rows() {
            assert_eq!(row.gap, 0.0);
            assert_eq!(row.eps_bayes, 0.0);
            assert_eq!(row.eps_rank, 0.0);
            assert!(row.holds);
            // All scores tie at 1.0, so the accepted prefix is the first k
            // samples in dataset order; eps_approx is its class-0 fraction.
            let k = (row.coverage * n as f64).round() as usize;
            let zeros = data.labels()[..k].iter().filter(|&&y| y == 0).count();
            assert!((row.eps_approx - zeros as f64 / k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_holds_for_trained_logistic_with_msp() {
        let task = symmetric_task();
        let train_data = sample_gaussian_task(&task, 2000, 7).unwrap();
        let eval = sample_gaussian_task(&task, 10_000, 8).unwrap();
        let spec = ModelSpec::logistic(2, 2).unwrap();
        let config = TrainConfig { epochs: 100, seed: 7, ..TrainConfig::default() };
        let model = train(&spec, &config, &train_data).unwrap();
        let pair = SelectivePair::new(Predictor::Single(model), ScoreFunction::Msp).unwrap();
        let oracle = PosteriorOracle::Gaussian(task);
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let dec = decompose(&eval, &oracle, &pair, &grid, 0.05).unwrap();
        assert_eq!(dec.holds_fraction(), 1.0, "rows: {:?}", dec.rows());
    }

    #[test]
    fn adversarial_reversal_still_bounded() {
        // 10-point instance, scores exactly anti-aligned with eta_h.
        let eta: Vec<Vec<f64>> = [0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.5]
            .iter()
            .map(|&e| vec![1.0 - e, e])
            .collect();
        let predicted = vec![1usize; 10];
        let eta_h: Vec<f64> = eta.iter().map(|r| r[1]).collect();
        let scores: Vec<f64> = eta_h.iter().map(|v| 1.0 - v).collect();
        // Realized correctness: say the top-eta_h half happened to be right.
        let correct: Vec<bool> = eta_h.iter().map(|&e| e > 0.7).collect();
        let grid = [0.2, 0.5, 0.8, 1.0];
        let dec = decompose_scored(&scores, &correct, &eta, &predicted, &grid, 0.05).unwrap();
        for row in dec.rows() {
            assert!(row.holds, "row {row:?}");
            assert!(row.eps_rank >= 0.0);
        }
        // The mid-coverage gap really is large.
        assert!(dec.rows()[1].gap > 0.3);
    }

    #[test]
    fn decompose_is_invariant_to_monotone_score_maps() {
        let task = symmetric_task();
        let data = sample_gaussian_task(&task, 500, 9).unwrap();
        let model = bayes_along_x();
        let scores: Vec<f64> = data
            .features()
            .iter()
            .map(|x| {
                let p = model.predict_proba(x).unwrap();
                p[0].max(p[1])
            })
            .collect();
        let correct: Vec<bool> = data
            .features()
            .iter()
            .zip(data.labels())
            .map(|(x, &y)| model.predict(x).unwrap() == y)
            .collect();
        let predicted: Vec<usize> =
            data.features().iter().map(|x| model.predict(x).unwrap()).collect();
        let eta = data.eta_true().unwrap().to_vec();
        let grid = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
        let base = decompose_scored(&scores, &correct, &eta, &predicted, &grid, 0.05).unwrap();
        let warped: Vec<f64> = scores.iter().map(|&s| (3.0 * s).exp() + s * s).collect();
        let same = decompose_scored(&warped, &correct, &eta, &predicted, &grid, 0.05).unwrap();
        assert_eq!(base, same);
    }

    #[test]
    fn oracle_scores_reduce_gap_to_bayes_terms() {
        let task = symmetric_task();
        let data = sample_gaussian_task(&task, 5000, 10).unwrap();
        let oracle = PosteriorOracle::Gaussian(task);
        let pair = SelectivePair::new(
            Predictor::Single(bayes_along_x()),
            ScoreFunction::OracleEtaH(oracle.clone()),
        )
        .unwrap();
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let dec = decompose(&data, &oracle, &pair, &grid, 0.05).unwrap();
        for row in dec.rows() {
            assert_eq!(row.eps_rank, 0.0, "oracle scores rank exactly like eta_h");
            assert!(
                row.gap <= row.eps_bayes + row.eps_approx + row.stat_slack,
                "row {row:?}"
            );
        }
    }

    #[test]
    fn csv_layout() {
        let eta = vec![vec![0.2, 0.8], vec![0.6, 0.4]];
        let dec = decompose_scored(&[0.9, 0.1], &[true, false], &eta, &[1, 0], &[0.5, 1.0], 0.1)
            .unwrap();
        let text = dec.to_csv();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "coverage,gap,eps_bayes,eps_approx,eps_rank,d_rank,eps_stat,bound_rhs,holds"
        );
        assert_eq!(text.lines().count(), 3);
    }
}
