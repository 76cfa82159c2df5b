//! Maximum mean discrepancy with an RBF kernel: a kernel two-sample statistic
//! used here as the measurable shift gauge.

use crate::error::{Error, Result};
use crate::synthdata::dataset::LabeledDataset;

/// RBF kernel bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Median pairwise distance over the pooled sample.
    Auto,
    Fixed(f64),
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of the pooled pairwise distances; falls back to 1.0 when the pooled
/// sample is a single repeated point.
fn median_heuristic(xs: &[&Vec<f64>]) -> f64 {
    let mut dists = Vec::with_capacity(xs.len() * (xs.len() - 1) / 2);
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            dists.push(sq_dist(xs[i], xs[j]).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let med = dists[dists.len() / 2];
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Unbiased MMD estimate between the feature distributions of two samples:
/// the U-statistic estimate of MMD^2 with kernel exp(-|x-y|^2 / (2 h^2)),
/// clamped at zero and square-rooted. Needs at least two points per sample.
pub fn mmd_rbf(sample_a: &LabeledDataset, sample_b: &LabeledDataset, bandwidth: Bandwidth) -> Result<f64> {
    let xs: Vec<&Vec<f64>> = sample_a.features().iter().collect();
    let ys: Vec<&Vec<f64>> = sample_b.features().iter().collect();
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::invalid("samples", "need at least two points per sample"));
    }
    if sample_a.dim() != sample_b.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample_a.dim(),
            got: sample_b.dim(),
        });
    }
    let h = match bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(_) => return Err(Error::invalid("bandwidth", "must be positive")),
        Bandwidth::Auto => {
            let pooled: Vec<&Vec<f64>> = xs.iter().chain(ys.iter()).copied().collect();
            median_heuristic(&pooled)
        }
    };
    let gamma = 1.0 / (2.0 * h * h);
    let kernel = |a: &[f64], b: &[f64]| (-sq_dist(a, b) * gamma).exp();

    let m = xs.len() as f64;
    let n = ys.len() as f64;
    let mut kxx = 0.0;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            if i != j {
                kxx += kernel(xs[i], xs[j]);
            }
        }
    }
    let mut kyy = 0.0;
    for i in 0..ys.len() {
        for j in 0..ys.len() {
            if i != j {
                kyy += kernel(ys[i], ys[j]);
            }
        }
    }
    let mut kxy = 0.0;
    for x in &xs {
        for y in &ys {
            kxy += kernel(x, y);
        }
    }
    let mmd2 = kxx / (m * (m - 1.0)) + kyy / (n * (n - 1.0)) - 2.0 * kxy / (m * n);
    Ok(mmd2.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::gaussian::{sample_gaussian_task, GaussianMixtureTask};
    use crate::synthdata::shift::{apply_shift, ShiftTransform};

    fn gaussian_sample(n: usize, seed: u64) -> LabeledDataset {
        let task = GaussianMixtureTask::binary(
            [0.0, 0.0],
            [0.0, 0.0],
            [[1.0, 0.0], [0.0, 1.0]],
            0.5,
        )
        .unwrap();
        sample_gaussian_task(&task, n, seed).unwrap()
    }

    #[test]
    fn identical_samples_give_zero() {
        let a = gaussian_sample(200, 1);
        let v = mmd_rbf(&a, &a, Bandwidth::Auto).unwrap();
        assert!(v <= 1e-9, "mmd = {v}");
    }

    #[test]
    fn same_distribution_is_small() {
        let a = gaussian_sample(2000, 2);
        let b = gaussian_sample(2000, 3);
        let v = mmd_rbf(&a, &b, Bandwidth::Auto).unwrap();
        assert!(v < 0.05, "mmd = {v}");
    }

    #[test]
    fn shifted_distribution_is_large() {
        let a = gaussian_sample(2000, 4);
        let b = apply_shift(&gaussian_sample(2000, 5), &ShiftTransform::Translation([3.0, 0.0]))
            .unwrap();
        let v = mmd_rbf(&a, &b, Bandwidth::Auto).unwrap();
        assert!(v > 0.5, "mmd = {v}");
    }

    #[test]
    fn tiny_samples_are_rejected() {
        let a = gaussian_sample(1, 6);
        let b = gaussian_sample(10, 7);
        assert!(mmd_rbf(&a, &b, Bandwidth::Auto).is_err());
    }

    #[test]
    fn degenerate_pooled_sample_falls_back() {
        let a = LabeledDataset::new(vec![vec![1.0, 1.0]; 3], vec![0; 3], 1, None, 0).unwrap();
        let v = mmd_rbf(&a, &a, Bandwidth::Auto).unwrap();
        assert!(v <= 1e-9);
    }
}
