//! Two-moons generator: two interleaved unit half-circles with Gaussian jitter.

use crate::error::{Error, Result};
use crate::synthdata::dataset::LabeledDataset;
use crate::synthdata::normal_pair;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Two-moons task parameters. `noise_sigma` is the standard deviation of the
/// isotropic Gaussian jitter added to the noiseless curves; `n_grid` is the
/// per-axis resolution used when a posterior oracle is estimated for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoMoonsTask {
    noise_sigma: f64,
    n_grid: usize,
}

impl TwoMoonsTask {
    pub fn new(noise_sigma: f64, n_grid: usize) -> Result<Self> {
        if !(noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", "must be nonnegative"));
        }
        if n_grid < 32 {
            return Err(Error::invalid("n_grid", "must be at least 32"));
        }
        Ok(Self { noise_sigma, n_grid })
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }
}

/// Point on the noiseless moon for class `class` at curve parameter
/// `t` in `[0, pi]`. Moon 0 is the upper unit half-circle centered at the
/// origin; moon 1 is the lower unit half-circle centered at (1, 0.5), i.e.
/// the standard construction whose second moon is the first one flipped and
/// offset so its tip sits at (1, -0.5).
pub fn moon_point(class: usize, t: f64) -> [f64; 2] {
    match class {
        0 => [t.cos(), t.sin()],
        _ => [1.0 - t.cos(), 0.5 - t.sin()],
    }
}

/// Euclidean distance from `x` to the noiseless arc of moon `class`.
pub fn distance_to_moon(class: usize, x: &[f64]) -> f64 {
    let (cx, cy, lower) = if class == 0 { (0.0, 0.0, false) } else { (1.0, 0.5, true) };
    let vx = x[0] - cx;
    let vy = x[1] - cy;
    let r = (vx * vx + vy * vy).sqrt();
    let on_arc = if lower { vy <= 0.0 } else { vy >= 0.0 };
    if on_arc && r > 0.0 {
        (r - 1.0).abs()
    } else {
        // Closest approach is one of the arc endpoints.
        let (e0, e1) = if lower {
            ([0.0, 0.5], [2.0, 0.5])
        } else {
            ([-1.0, 0.0], [1.0, 0.0])
        };
        let d0 = ((x[0] - e0[0]).powi(2) + (x[1] - e0[1]).powi(2)).sqrt();
        let d1 = ((x[0] - e1[0]).powi(2) + (x[1] - e1[1]).powi(2)).sqrt();
        d0.min(d1)
    }
}

/// Index of the nearest noiseless moon.
pub fn nearest_moon(x: &[f64]) -> usize {
    if distance_to_moon(0, x) <= distance_to_moon(1, x) {
        0
    } else {
        1
    }
}

/// Draw `n` samples: `n - n/2` on moon 0 and `n/2` on moon 1, placed evenly
/// along the arcs and jittered by N(0, sigma^2 I). The posterior column is
/// left empty; build it with [`estimate_posterior_grid`] when sigma > 0.
///
/// [`estimate_posterior_grid`]: crate::synthdata::estimate_posterior_grid
pub fn sample_two_moons(task: &TwoMoonsTask, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::invalid("n", "need at least two samples"));
    }
    let counts = [n - n / 2, n / 2];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for class in 0..2 {
        let m = counts[class];
        for i in 0..m {
            let t = if m == 1 { 0.0 } else { i as f64 * PI / (m - 1) as f64 };
            let mut p = moon_point(class, t);
            if task.noise_sigma > 0.0 {
                let (z0, z1) = normal_pair(&mut rng);
                p[0] += task.noise_sigma * z0;
                p[1] += task.noise_sigma * z1;
            }
            features.push(p.to_vec());
            labels.push(class);
        }
    }
    LabeledDataset::new(features, labels, 2, None, seed)
}

/// Log class-conditional density of the jittered moon distribution,
/// approximated by averaging the Gaussian jitter kernel over `anchors`
/// points drawn from the noiseless arc. Stable far from the data.
pub(crate) fn moon_log_density(anchors: &[[f64; 2]], sigma: f64, x: [f64; 2]) -> f64 {
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    // log-sum-exp over anchor kernels
    let mut max = f64::NEG_INFINITY;
    let mut quads = Vec::with_capacity(anchors.len());
    for a in anchors {
        let d2 = (x[0] - a[0]).powi(2) + (x[1] - a[1]).powi(2);
        let q = -d2 * inv2s2;
        if q > max {
            max = q;
        }
        quads.push(q);
    }
    let sum: f64 = quads.iter().map(|&q| (q - max).exp()).sum();
    max + sum.ln() - (anchors.len() as f64).ln() - (2.0 * PI * sigma * sigma).ln()
}

/// Draw `m` points uniformly (in curve parameter) from the noiseless arc.
pub(crate) fn moon_anchors(class: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    (0..m).map(|_| moon_point(class, rng.gen::<f64>() * PI)).collect()
}
