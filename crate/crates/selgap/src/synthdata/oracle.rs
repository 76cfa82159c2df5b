//! Queryable ground-truth posteriors for the synthetic distributions.

use crate::error::{Error, Result};
use crate::synthdata::dataset::LabeledDataset;
use crate::synthdata::gaussian::GaussianMixtureTask;
use crate::synthdata::moons::{moon_anchors, moon_log_density, TwoMoonsTask};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How a [`PosteriorOracle`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Closed-form posterior of the generating distribution.
    Analytic,
    /// Kernel-averaged densities tabulated on a grid, bilinearly interpolated.
    GridEstimate,
}

/// Deterministic map from a feature vector to the class posterior. Every
/// returned vector is a probability vector (components in [0,1], summing to
/// one), for all queries.
#[derive(Debug, Clone)]
pub enum PosteriorOracle {
    Gaussian(GaussianMixtureTask),
    Grid(GridOracle),
}

impl PosteriorOracle {
    pub fn provenance(&self) -> Provenance {
        match self {
            PosteriorOracle::Gaussian(_) => Provenance::Analytic,
            PosteriorOracle::Grid(_) => Provenance::GridEstimate,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            PosteriorOracle::Gaussian(task) => task.num_classes(),
            PosteriorOracle::Grid(_) => 2,
        }
    }

    /// Class posterior at `x`.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            PosteriorOracle::Gaussian(task) => task.posterior(x),
            PosteriorOracle::Grid(grid) => {
                if x.len() != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, got: x.len() });
                }
                let eta1 = grid.eta1_at(x[0], x[1]);
                Ok(vec![1.0 - eta1, eta1])
            }
        }
    }

    /// Posterior rows for a whole dataset.
    pub fn posterior_rows(&self, data: &LabeledDataset) -> Result<Vec<Vec<f64>>> {
        data.features().iter().map(|x| self.posterior(x)).collect()
    }
}

/// Binary class-1 posterior tabulated on a regular grid. Queries outside the
/// grid clamp to the boundary; storing the posterior itself (rather than the
/// densities) keeps every interpolated value a valid probability.
#[derive(Debug, Clone)]
pub struct GridOracle {
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    eta1: Vec<f64>,
}

impl GridOracle {
    /// Tabulate the class-1 posterior from per-class log densities and log
    /// priors, evaluated at `n_grid` x `n_grid` nodes spanning the box.
    pub fn from_log_densities<F0, F1>(
        lo: [f64; 2],
        hi: [f64; 2],
        n_grid: usize,
        log_density0: F0,
        log_density1: F1,
        log_prior0: f64,
        log_prior1: f64,
    ) -> Result<Self>
    where
        F0: Fn([f64; 2]) -> f64 + Sync,
        F1: Fn([f64; 2]) -> f64 + Sync,
    {
        if n_grid < 2 {
            return Err(Error::invalid("n_grid", "need at least a 2x2 grid"));
        }
        if !(hi[0] > lo[0]) || !(hi[1] > lo[1]) {
            return Err(Error::invalid("bbox", "degenerate bounding box"));
        }
        let (nx, ny) = (n_grid, n_grid);
        let dx = (hi[0] - lo[0]) / (nx - 1) as f64;
        let dy = (hi[1] - lo[1]) / (ny - 1) as f64;
        let mut eta1 = vec![0.0; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let p = [lo[0] + ix as f64 * dx, lo[1] + iy as f64 * dy];
                let l0 = log_prior0 + log_density0(p);
                let l1 = log_prior1 + log_density1(p);
                // sigma(l1 - l0), stable for large |l1 - l0|
                eta1[iy * nx + ix] = 1.0 / (1.0 + (l0 - l1).exp());
            }
        }
        Ok(Self { x0: lo[0], y0: lo[1], dx, dy, nx, ny, eta1 })
    }

    /// Bilinearly interpolated class-1 posterior, clamped to the grid.
    pub fn eta1_at(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.x0) / self.dx).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.y0) / self.dy).clamp(0.0, (self.ny - 1) as f64);
        let ix = (fx.floor() as usize).min(self.nx - 2);
        let iy = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let at = |i: usize, j: usize| self.eta1[j * self.nx + i];
        let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
        let bot = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bot * ty
    }
}

/// Estimate a two-moons posterior oracle. Class-conditional densities are
/// obtained by averaging the known jitter kernel over `mc_samples` points
/// drawn from each noiseless arc, the posterior follows by Bayes' rule with
/// equal class priors, and the result is tabulated on a grid covering the
/// data bounding box padded by three noise standard deviations.
///
/// Requires `noise_sigma > 0`: with zero jitter the posterior is degenerate
/// almost everywhere (use the noiseless arc membership instead).
pub fn estimate_posterior_grid(
    data: &LabeledDataset,
    task: &TwoMoonsTask,
    mc_samples: usize,
    seed: u64,
) -> Result<PosteriorOracle> {
    let sigma = task.noise_sigma();
    if sigma <= 0.0 {
        return Err(Error::invalid(
            "noise_sigma",
            "posterior estimation needs positive jitter",
        ));
    }
    if mc_samples == 0 {
        return Err(Error::invalid("mc_samples", "must be positive"));
    }
    if data.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: data.dim() });
    }
    let (lo, hi) = data.bounding_box()?;
    let pad = 3.0 * sigma;
    let lo = [lo[0] - pad, lo[1] - pad];
    let hi = [hi[0] + pad, hi[1] + pad];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors0 = moon_anchors(0, mc_samples, &mut rng);
    let anchors1 = moon_anchors(1, mc_samples, &mut rng);
    let half = 0.5_f64.ln();
    let grid = GridOracle::from_log_densities(
        lo,
        hi,
        task.n_grid(),
        |p| moon_log_density(&anchors0, sigma, p),
        |p| moon_log_density(&anchors1, sigma, p),
        half,
        half,
    )?;
    Ok(PosteriorOracle::Grid(grid))
}
