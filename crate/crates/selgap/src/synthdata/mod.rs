//! Synthetic binary (and small multiclass) classification tasks with known
//! Bayes posteriors, plus the affine shift transforms and the MMD shift gauge.
//!
//! All generators are pure functions of their parameters and an explicit
//! seed; repeated calls produce byte-identical datasets.

mod dataset;
mod gaussian;
mod mmd;
mod moons;
mod oracle;
mod shift;

pub use dataset::{validate_posterior, LabeledDataset, ETA_SUM_TOL};
pub use gaussian::{sample_gaussian_task, GaussianMixtureTask};
pub use mmd::{mmd_rbf, Bandwidth};
pub use moons::{distance_to_moon, moon_point, nearest_moon, sample_two_moons, TwoMoonsTask};
pub use oracle::{estimate_posterior_grid, GridOracle, PosteriorOracle, Provenance};
pub use shift::{apply_shift, ShiftTransform};

pub(crate) use gaussian::softmax;

use rand::Rng;

/// One Box-Muller draw: two independent standard normals.
pub(crate) fn normal_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}
