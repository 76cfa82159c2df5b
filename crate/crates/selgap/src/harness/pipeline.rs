//! Per-seed pipeline pieces shared by the experiment commands: sampling,
//! splitting, training, and pair evaluation.

use crate::curves::{aurc, empirical_curve, gap_curve, CoverageCurve, GapCurve};
use crate::decomposition::GapDecomposition;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, TaskConfig};
use crate::models::{train, ModelSpec, TrainConfig, TrainedModel};
use crate::scoring::SelectivePair;
use crate::synthdata::{
    estimate_posterior_grid, sample_gaussian_task, sample_two_moons, LabeledDataset,
    PosteriorOracle,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Sampled dataset for one seed, split 60/20/20 (by the configured
/// fractions) into disjoint train / calibration / evaluation parts, plus the
/// posterior oracle for the generating distribution.
pub struct SeedData {
    pub seed: u64,
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
    pub oracle: PosteriorOracle,
    pub split: SplitIndices,
}

/// The recorded split: which rows of the full draw went where.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    /// Roles are disjoint and cover 0..n exactly once.
    pub fn is_partition(&self, n: usize) -> bool {
        let mut seen = vec![0u8; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n {
                return false;
            }
            seen[i] += 1;
        }
        seen.iter().all(|&c| c == 1)
    }

    /// Serialize as CSV: `index,role`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,role\n");
        let mut rows: Vec<(usize, &str)> = Vec::new();
        for &i in &self.train {
            rows.push((i, "train"));
        }
        for &i in &self.val {
            rows.push((i, "val"));
        }
        for &i in &self.test {
            rows.push((i, "test"));
        }
        rows.sort_unstable();
        for (i, role) in rows {
            out.push_str(&format!("{i},{role}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_csv())
    }
}

/// Deterministic shuffled split of 0..n into the three fractions.
pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> SplitIndices {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x517_u64);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let n_train = ((n as f64) * fractions[0]).round() as usize;
    let n_val = ((n as f64) * fractions[1]).round() as usize;
    let n_train = n_train.min(n);
    let n_val = n_val.min(n - n_train);
    SplitIndices {
        train: idx[..n_train].to_vec(),
        val: idx[n_train..n_train + n_val].to_vec(),
        test: idx[n_train + n_val..].to_vec(),
    }
}

/// Draw one seed's dataset for the task.
pub fn sample_task(task: &TaskConfig, n: usize, seed: u64) -> Result<LabeledDataset> {
    match task {
        TaskConfig::TwoMoons { .. } => sample_two_moons(&task.moons()?, n, seed),
        TaskConfig::Gaussian { .. } => sample_gaussian_task(&task.gaussian()?, n, seed),
    }
}

/// Posterior oracle for the task: analytic for Gaussian mixtures, a grid
/// estimate (built over the full draw's bounding box) for two moons.
pub fn task_oracle(
    task: &TaskConfig,
    full: &LabeledDataset,
    mc_samples: usize,
    seed: u64,
) -> Result<PosteriorOracle> {
    match task {
        TaskConfig::Gaussian { .. } => Ok(PosteriorOracle::Gaussian(task.gaussian()?)),
        TaskConfig::TwoMoons { .. } => {
            estimate_posterior_grid(full, &task.moons()?, mc_samples, seed ^ 0x07ac1e_u64)
        }
    }
}

/// Sample, split, and build the oracle for one seed.
pub fn prepare_seed(cfg: &ExperimentConfig, task: &TaskConfig, seed: u64) -> Result<SeedData> {
    let full = sample_task(task, cfg.n_total, seed)?;
    let split = split_indices(full.len(), cfg.split, seed);
    debug_assert!(split.is_partition(full.len()));
    Ok(SeedData {
        seed,
        train: full.subset(&split.train)?,
        val: full.subset(&split.val)?,
        test: full.subset(&split.test)?,
        oracle: task_oracle(task, &full, cfg.mc_samples, seed)?,
        split,
    })
}

/// Train one model for one seed: the config's SGD hyper-parameters with the
/// seed substituted in.
pub fn train_for_seed(
    spec: &ModelSpec,
    train_cfg: &TrainConfig,
    data: &LabeledDataset,
    seed: u64,
) -> Result<TrainedModel> {
    train(spec, &train_cfg.with_seed(seed), data)
}

/// Curve-level evaluation of a selective pair on a dataset.
pub struct PairEval {
    pub scored: Vec<(f64, bool)>,
    pub curve: CoverageCurve,
    pub gap: GapCurve,
    pub a_full: f64,
    pub aurc: f64,
    pub e_aurc: f64,
}

pub fn eval_pair(pair: &SelectivePair, data: &LabeledDataset) -> Result<PairEval> {
    let scored = pair.score_dataset(data)?;
    let curve = empirical_curve(&scored)?;
    let gap = gap_curve(&curve);
    Ok(PairEval {
        a_full: curve.a_full(),
        aurc: aurc(&curve),
        e_aurc: gap.e_aurc(),
        scored,
        curve,
        gap,
    })
}

/// Decomposition summary used in report rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompSummary {
    pub eps_bayes_mean: f64,
    pub eps_approx_mean: f64,
    pub eps_rank_mean: f64,
    pub holds_frac: f64,
    /// Mean of the residual-slack diagnostic (gap mass the intrinsic terms
    /// do not cover, clamped at zero per row).
    pub residual_mean: f64,
}

pub fn summarize(dec: &GapDecomposition) -> DecompSummary {
    let rows = dec.rows();
    let n = rows.len().max(1) as f64;
    DecompSummary {
        eps_bayes_mean: rows.iter().map(|r| r.eps_bayes).sum::<f64>() / n,
        eps_approx_mean: rows.iter().map(|r| r.eps_approx).sum::<f64>() / n,
        eps_rank_mean: rows.iter().map(|r| r.eps_rank).sum::<f64>() / n,
        holds_frac: dec.holds_fraction(),
        residual_mean: rows.iter().map(|r| r.residual_slack()).sum::<f64>() / n,
    }
}

/// Mean and standard error of a per-seed metric.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Paired per-seed differences a - b with their mean and standard error.
pub fn paired_diff(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid("paired_diff", "need matching nonempty samples"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(mean_se(&diffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_disjoint_partition() {
        for n in [10, 97, 5000] {
            let s = split_indices(n, [0.6, 0.2, 0.2], 3);
            assert!(s.is_partition(n));
        }
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let a = split_indices(100, [0.6, 0.2, 0.2], 7);
        let b = split_indices(100, [0.6, 0.2, 0.2], 7);
        assert_eq!(a, b);
        let c = split_indices(100, [0.6, 0.2, 0.2], 8);
        assert_ne!(a, c);
    }

    #[test]
    fn split_sizes_follow_fractions() {
        let s = split_indices(5000, [0.6, 0.2, 0.2], 0);
        assert_eq!(s.train.len(), 3000);
        assert_eq!(s.val.len(), 1000);
        assert_eq!(s.test.len(), 1000);
    }

    #[test]
    fn prepare_seed_builds_consistent_parts() {
        let cfg = ExperimentConfig { n_total: 200, ..ExperimentConfig::default() };
        let task = cfg.task.clone();
        let sd = prepare_seed(&cfg, &task, 1).unwrap();
        assert_eq!(sd.train.len() + sd.val.len() + sd.test.len(), 200);
        assert!(sd.split.is_partition(200));
        // Oracle answers probability vectors on test points.
        for x in sd.test.features().iter().take(10) {
            let eta = sd.oracle.posterior(x).unwrap();
            crate::synthdata::validate_posterior(&eta).unwrap();
        }
    }
}
