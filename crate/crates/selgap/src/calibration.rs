//! Post-hoc calibrators (temperature scaling, isotonic regression, histogram
//! binning), the expected calibration error, and the cross-sample
//! re-ranking detector for temperature scaling.
//!
//! Within one sample, dividing logits by T > 0 never changes the argmax;
//! across samples the max-probability ordering can change, exactly at the
//! temperatures where the competing samples' tail sums S_i(T) intersect.

use crate::error::{Error, Result};
use crate::io_util::fmt_f64;
use crate::models::argmax;
use crate::synthdata::softmax;
use std::path::Path;

/// Fitted temperature and how the search ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureScaling {
    pub t: f64,
    /// The optimum sat on the search boundary (the range excluded it).
    pub clamped: bool,
    /// The validation logits were degenerate (all rows identical); T = 1.
    pub degenerate: bool,
}

/// Monotone step map fitted by pool-adjacent-violators. Block `i` covers
/// scores in `[thresholds[i], thresholds[i+1])`; queries below the first
/// threshold take the first value, above the last take the last.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicMap {
    thresholds: Vec<f64>,
    values: Vec<f64>,
    pool_counts: Vec<usize>,
}

impl IsotonicMap {
    pub fn apply(&self, score: f64) -> f64 {
        let idx = self.thresholds.partition_point(|&t| t <= score);
        if idx == 0 {
            self.values[0]
        } else {
            self.values[idx - 1]
        }
    }

    pub fn levels(&self) -> (&[f64], &[f64]) {
        (&self.thresholds, &self.values)
    }

    /// Largest number of fit points sharing one output value (the kappa' of
    /// the flat-segment tie slack). Adjacent blocks that happen to carry
    /// equal values count as one level: they are indistinguishable after
    /// calibration.
    pub fn max_level_multiplicity(&self) -> usize {
        let mut best = 0usize;
        let mut run = 0usize;
        let mut prev: Option<u64> = None;
        for (v, &c) in self.values.iter().zip(&self.pool_counts) {
            run = match prev {
                Some(bits) if bits == v.to_bits() => run + c,
                _ => c,
            };
            prev = Some(v.to_bits());
            best = best.max(run);
        }
        best
    }
}

/// Equal-width histogram binning calibrator on [0, 1]. Maps a score to the
/// empirical accuracy of its bin (bin midpoint when the bin saw no data).
/// Quantizing wide score ranges to one value destroys within-bin ordering,
/// which is exactly what the curve-degradation checks surface.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramMap {
    edges: Vec<f64>,
    values: Vec<f64>,
}

impl HistogramMap {
    pub fn apply(&self, score: f64) -> f64 {
        let b = bin_index(score, self.values.len());
        self.values[b]
    }

    pub fn bins(&self) -> (&[f64], &[f64]) {
        (&self.edges, &self.values)
    }
}

/// A fitted post-hoc calibrator.
#[derive(Debug, Clone, PartialEq)]
pub enum Calibrator {
    Temperature(TemperatureScaling),
    Isotonic(IsotonicMap),
    Histogram(HistogramMap),
}

impl Calibrator {
    pub fn name(&self) -> &'static str {
        match self {
            Calibrator::Temperature(_) => "temperature",
            Calibrator::Isotonic(_) => "isotonic",
            Calibrator::Histogram(_) => "histogram",
        }
    }

    /// Apply to a confidence score. Temperature scaling operates on logits,
    /// not scores; use [`apply_temperature`] for it.
    pub fn apply_score(&self, score: f64) -> Result<f64> {
        match self {
            Calibrator::Temperature(_) => Err(Error::invalid(
                "calibrator",
                "temperature scaling applies to logit vectors, not scalar scores",
            )),
            Calibrator::Isotonic(m) => Ok(m.apply(score)),
            Calibrator::Histogram(m) => Ok(m.apply(score)),
        }
    }
}

fn tempered_nll(logit_rows: &[Vec<f64>], labels: &[usize], t: f64) -> f64 {
    let mut total = 0.0;
    for (z, &y) in logit_rows.iter().zip(labels) {
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / t;
        let lse = max + z.iter().map(|&v| (v / t - max).exp()).sum::<f64>().ln();
        total += lse - z[y] / t;
    }
    total / logit_rows.len() as f64
}

/// Fit the temperature minimizing the mean negative log-likelihood of the
/// tempered softmax on validation logits, by golden-section search on log T
/// over `t_range` (default `(e^-3, e^3)` when `None`). Deterministic. If the
/// optimum sits on the range boundary the result is flagged `clamped`; if
/// all logit rows are identical the fit is vacuous and T = 1 is returned
/// with the `degenerate` flag.
pub fn fit_temperature(
    logit_rows: &[Vec<f64>],
    labels: &[usize],
    t_range: Option<(f64, f64)>,
) -> Result<TemperatureScaling> {
    if logit_rows.is_empty() || logit_rows.len() != labels.len() {
        return Err(Error::invalid("logits", "need one label per nonempty logit row"));
    }
    let k = logit_rows[0].len();
    if logit_rows.iter().any(|r| r.len() != k) {
        return Err(Error::invalid("logits", "ragged logit rows"));
    }
    if labels.iter().any(|&y| y >= k) {
        return Err(Error::invalid("labels", "label out of range"));
    }
    let (lo, hi) = t_range.unwrap_or(((-3.0_f64).exp(), (3.0_f64).exp()));
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("t_range", "need 0 < lo < hi"));
    }

    let first = &logit_rows[0];
    if logit_rows.iter().all(|r| r == first) {
        return Ok(TemperatureScaling { t: 1.0, clamped: false, degenerate: true });
    }

    // Golden-section on u = ln T.
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let width = b - a;
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let f = |u: f64| tempered_nll(logit_rows, labels, u.exp());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let u = 0.5 * (a + b);
    let clamped = (u - lo.ln()).abs() < 1e-6 * width.max(1.0) || (hi.ln() - u).abs() < 1e-6 * width.max(1.0);
    Ok(TemperatureScaling { t: u.exp(), clamped, degenerate: false })
}

/// Tempered softmax probabilities softmax(z / T).
pub fn apply_temperature(logits: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", "temperature must be positive"));
    }
    let scaled: Vec<f64> = logits.iter().map(|&z| z / t).collect();
    Ok(softmax(&scaled))
}

/// Max tempered-softmax probability computed through the ratio form
/// s_T = 1 / (1 + sum_{j != j*} r_j^{1/T}) with r_j = exp(z_j - z_{j*}).
pub fn tempered_msp(logits: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", "temperature must be positive"));
    }
    Ok(1.0 / (1.0 + tail_sum(logits, t)))
}

/// S(T) = sum over non-argmax classes of r_j^{1/T}.
fn tail_sum(logits: &[f64], t: f64) -> f64 {
    let j_star = argmax(logits);
    logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != j_star)
        .map(|(_, &z)| ((z - logits[j_star]) / t).exp())
        .sum()
}

/// Result of scanning two logit vectors for confidence-order swaps across
/// temperatures.
#[derive(Debug, Clone, PartialEq)]
pub enum SwapScan {
    /// The two tail sums coincide at every scanned temperature (identical
    /// score profiles): the ordering is a tie everywhere.
    Degenerate,
    /// Bracketed sign changes of S_1(T) - S_2(T), each refined by bisection
    /// to width 1e-6. Empty when the order never changes on the grid.
    Crossings(Vec<(f64, f64)>),
}

impl SwapScan {
    pub fn crossings(&self) -> &[(f64, f64)] {
        match self {
            SwapScan::Degenerate => &[],
            SwapScan::Crossings(c) => c,
        }
    }
}

/// Find the temperatures where the confidence ordering of two samples can
/// change: the sign changes of S_1(T) - S_2(T) over the (ascending) grid.
pub fn find_swap_temperatures(z1: &[f64], z2: &[f64], t_grid: &[f64]) -> Result<SwapScan> {
    if t_grid.len() < 2 {
        return Err(Error::invalid("t_grid", "need at least two grid points"));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) || t_grid[0] <= 0.0 {
        return Err(Error::invalid("t_grid", "must be positive and strictly ascending"));
    }
    let f = |t: f64| tail_sum(z1, t) - tail_sum(z2, t);
    let vals: Vec<f64> = t_grid.iter().map(|&t| f(t)).collect();
    if vals.iter().all(|v| v.abs() < 1e-12) {
        return Ok(SwapScan::Degenerate);
    }
    let mut crossings = Vec::new();
    for (w, v) in t_grid.windows(2).zip(vals.windows(2)) {
        if (v[0] > 0.0) != (v[1] > 0.0) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let f_lo = f(lo);
            while hi - lo > 1e-6 {
                let mid = 0.5 * (lo + hi);
                if (f(mid) > 0.0) == (f_lo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push((lo, hi));
        }
    }
    Ok(SwapScan::Crossings(crossings))
}

/// Pool-adjacent-violators fit: the monotone nondecreasing step function
/// minimizing squared error to the 0/1 correctness indicators. Samples with
/// exactly equal scores are pooled before the sweep.
pub fn fit_isotonic(scores: &[f64], correct: &[bool]) -> Result<IsotonicMap> {
    if scores.is_empty() || scores.len() != correct.len() {
        return Err(Error::invalid("scores", "need one indicator per nonempty score"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores", "must be finite"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));

    // (min score, target sum, count) blocks; equal scores pooled first.
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for &i in &order {
        let y = if correct[i] { 1.0 } else { 0.0 };
        match blocks.last_mut() {
            Some(last) if last.0.to_bits() == scores[i].to_bits() => {
                last.1 += y;
                last.2 += 1;
            }
            _ => blocks.push((scores[i], y, 1)),
        }
    }

    let mut pooled: Vec<(f64, f64, usize)> = Vec::with_capacity(blocks.len());
    for b in blocks {
        pooled.push(b);
        while pooled.len() >= 2 {
            let n = pooled.len();
            let mean_last = pooled[n - 1].1 / pooled[n - 1].2 as f64;
            let mean_prev = pooled[n - 2].1 / pooled[n - 2].2 as f64;
            if mean_last < mean_prev {
                let last = pooled.pop().unwrap();
                let prev = pooled.last_mut().unwrap();
                prev.1 += last.1;
                prev.2 += last.2;
            } else {
                break;
            }
        }
    }

    let thresholds: Vec<f64> = pooled.iter().map(|b| b.0).collect();
    let values: Vec<f64> = pooled.iter().map(|b| b.1 / b.2 as f64).collect();
    let pool_counts: Vec<usize> = pooled.iter().map(|b| b.2).collect();
    Ok(IsotonicMap { thresholds, values, pool_counts })
}

/// Histogram-binning calibrator: `n_bins` equal-width bins on [0, 1], each
/// mapped to its empirical accuracy (bin midpoint when empty).
pub fn fit_histogram(scores: &[f64], correct: &[bool], n_bins: usize) -> Result<HistogramMap> {
    if scores.is_empty() || scores.len() != correct.len() {
        return Err(Error::invalid("scores", "need one indicator per nonempty score"));
    }
    if n_bins == 0 {
        return Err(Error::invalid("n_bins", "must be positive"));
    }
    let mut hits = vec![0usize; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&s, &c) in scores.iter().zip(correct) {
        let b = bin_index(s, n_bins);
        counts[b] += 1;
        if c {
            hits[b] += 1;
        }
    }
    let edges: Vec<f64> = (0..=n_bins).map(|b| b as f64 / n_bins as f64).collect();
    let values: Vec<f64> = (0..n_bins)
        .map(|b| {
            if counts[b] > 0 {
                hits[b] as f64 / counts[b] as f64
            } else {
                (b as f64 + 0.5) / n_bins as f64
            }
        })
        .collect();
    Ok(HistogramMap { edges, values })
}

/// Right-closed equal-width bin index on [0, 1]: bin b covers
/// (b/B, (b+1)/B], with 0 landing in bin 0 and out-of-range scores clamped.
fn bin_index(score: f64, n_bins: usize) -> usize {
    if score <= 0.0 {
        return 0;
    }
    let idx = (score * n_bins as f64).ceil() as usize;
    idx.saturating_sub(1).min(n_bins - 1)
}

/// One reliability bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_confidence: f64,
    pub accuracy: f64,
}

/// Binned reliability summary with the expected calibration error: the
/// bin-mass-weighted mean of |accuracy - mean confidence|. Empty bins
/// contribute zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    pub bins: Vec<ReliabilityBin>,
    pub ece: f64,
    pub n_bins: usize,
    pub n: usize,
}

impl ReliabilityReport {
    /// Serialize as CSV (`bin_lo,bin_hi,count,mean_conf,accuracy`) with an
    /// `ece,<value>` footer row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,mean_conf,accuracy\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(b.lo),
                fmt_f64(b.hi),
                b.count,
                fmt_f64(b.mean_confidence),
                fmt_f64(b.accuracy)
            ));
        }
        out.push_str(&format!("ece,{}\n", fmt_f64(self.ece)));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_csv())
    }
}

/// Expected calibration error over `n_bins` equal-width right-closed bins.
pub fn ece(confidences: &[f64], correct: &[bool], n_bins: usize) -> Result<ReliabilityReport> {
    if confidences.is_empty() || confidences.len() != correct.len() {
        return Err(Error::invalid("confidences", "need one indicator per nonempty confidence"));
    }
    if n_bins == 0 {
        return Err(Error::invalid("n_bins", "must be positive"));
    }
    if confidences.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::invalid("confidences", "must lie in [0, 1]"));
    }
    let mut sums = vec![0.0; n_bins];
    let mut hits = vec![0usize; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&s, &c) in confidences.iter().zip(correct) {
        let b = bin_index(s, n_bins);
        sums[b] += s;
        counts[b] += 1;
        if c {
            hits[b] += 1;
        }
    }
    let n = confidences.len();
    let mut total = 0.0;
    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let (mean_conf, acc) = if counts[b] > 0 {
            (sums[b] / counts[b] as f64, hits[b] as f64 / counts[b] as f64)
        } else {
            (0.0, 0.0)
        };
        total += counts[b] as f64 / n as f64 * (acc - mean_conf).abs();
        bins.push(ReliabilityBin {
            lo: b as f64 / n_bins as f64,
            hi: (b + 1) as f64 / n_bins as f64,
            count: counts[b],
            mean_confidence: mean_conf,
            accuracy: acc,
        });
    }
    Ok(ReliabilityReport { bins, ece: total, n_bins, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::empirical_curve;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const Z1: [f64; 3] = [-2.0, -3.0, -3.0];
    const Z2: [f64; 3] = [0.0, -0.1, -3.0];

    #[test]
    fn tempered_msp_reference_values() {
        assert!((tempered_msp(&Z1, 1.0).unwrap() - 0.576).abs() < 1e-3);
        assert!((tempered_msp(&Z2, 1.0).unwrap() - 0.512).abs() < 1e-3);
        assert!((tempered_msp(&Z1, 3.0).unwrap() - 0.411).abs() < 1e-3);
        assert!((tempered_msp(&Z2, 3.0).unwrap() - 0.428).abs() < 1e-3);
        // The ordering flips between T=1 and T=3.
        assert!(tempered_msp(&Z1, 1.0).unwrap() > tempered_msp(&Z2, 1.0).unwrap());
        assert!(tempered_msp(&Z1, 3.0).unwrap() < tempered_msp(&Z2, 3.0).unwrap());
    }

    #[test]
    fn softmax_and_ratio_form_agree() {
        for &t in &[0.3, 1.0, 2.5, 10.0] {
            for z in [Z1.as_slice(), Z2.as_slice(), &[1.0, -0.5]] {
                let p = apply_temperature(z, t).unwrap();
                let direct = p[argmax(&p)];
                assert!((direct - tempered_msp(z, t).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn high_temperature_tends_to_uniform() {
        let p = apply_temperature(&Z2, 1e9).unwrap();
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn temperature_never_changes_the_argmax_within_a_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let z: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let base = argmax(&apply_temperature(&z, 1.0).unwrap());
            for &t in &[0.05, 0.5, 2.0, 40.0] {
                assert_eq!(argmax(&apply_temperature(&z, t).unwrap()), base);
            }
        }
    }

    #[test]
    fn swap_detector_finds_the_reference_crossing() {
        let grid: Vec<f64> = (1..=60).map(|i| 0.25 * i as f64).collect();
        let scan = find_swap_temperatures(&Z1, &Z2, &grid).unwrap();
        let crossings = scan.crossings();
        assert_eq!(crossings.len(), 1, "{crossings:?}");
        let (lo, hi) = crossings[0];
        assert!(lo > 1.0 && hi < 3.0, "crossing at ({lo}, {hi})");
        assert!(hi - lo <= 1e-6);
    }

    #[test]
    fn identical_logits_are_degenerate() {
        let grid = [0.5, 1.0, 2.0, 4.0];
        let scan = find_swap_temperatures(&Z1, &Z1, &grid).unwrap();
        assert_eq!(scan, SwapScan::Degenerate);
    }

    #[test]
    fn binary_margins_never_cross() {
        let grid: Vec<f64> = (1..=100).map(|i| 0.1 * i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let m1: f64 = rng.gen_range(0.1..4.0);
            let m2: f64 = rng.gen_range(0.1..4.0);
            if (m1 - m2).abs() < 1e-9 {
                continue;
            }
            let z1 = [m1, 0.0];
            let z2 = [m2, 0.0];
            let scan = find_swap_temperatures(&z1, &z2, &grid).unwrap();
            assert!(scan.crossings().is_empty(), "margins {m1} {m2}: {scan:?}");
        }
    }

    fn synthetic_logits(n: usize, k: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        // Labels drawn from the softmax of the logits themselves, so the NLL
        // is minimized near T = 1 in expectation.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let z: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = softmax(&z);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut y = k - 1;
            for (j, &pj) in p.iter().enumerate() {
                acc += pj;
                if u < acc {
                    y = j;
                    break;
                }
            }
            rows.push(z);
            labels.push(y);
        }
        (rows, labels)
    }

    #[test]
    fn self_consistent_logits_fit_near_unit_temperature() {
        let (rows, labels) = synthetic_logits(8000, 3, 2);
        let fit = fit_temperature(&rows, &labels, None).unwrap();
        assert!(!fit.clamped && !fit.degenerate);
        assert!((0.95..=1.05).contains(&fit.t), "T = {}", fit.t);

        // Independent oracle: fine grid search over log T.
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..4000 {
            let t = (-3.0 + 6.0 * i as f64 / 3999.0_f64).exp();
            let nll = tempered_nll(&rows, &labels, t);
            if nll < best.0 {
                best = (nll, t);
            }
        }
        assert!((fit.t - best.1).abs() / best.1 < 0.01, "golden {} vs grid {}", fit.t, best.1);
    }

    #[test]
    fn scaling_logits_scales_the_fitted_temperature() {
        let (rows, labels) = synthetic_logits(4000, 3, 3);
        let base = fit_temperature(&rows, &labels, None).unwrap();
        let doubled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|z| 2.0 * z).collect()).collect();
        let fit2 = fit_temperature(&doubled, &labels, None).unwrap();
        assert!((fit2.t / base.t - 2.0).abs() < 0.1, "{} vs {}", fit2.t, base.t);
    }

    #[test]
    fn range_excluding_optimum_clamps() {
        let (rows, labels) = synthetic_logits(2000, 3, 4);
        let fit = fit_temperature(&rows, &labels, Some((5.0, 20.0))).unwrap();
        assert!(fit.clamped, "T = {}", fit.t);
        assert!((fit.t - 5.0).abs() / 5.0 < 0.01);
    }

    #[test]
    fn degenerate_logits_return_unit_temperature() {
        let rows = vec![vec![0.5, -0.5]; 10];
        let labels = vec![0usize; 10];
        let fit = fit_temperature(&rows, &labels, None).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.t, 1.0);
    }

    #[test]
    fn pav_reference_fit() {
        let scores = [0.1, 0.35, 0.4, 0.8];
        let correct = [false, true, false, true];
        let map = fit_isotonic(&scores, &correct).unwrap();
        let fitted: Vec<f64> = scores.iter().map(|&s| map.apply(s)).collect();
        assert_eq!(fitted, vec![0.0, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn pav_identity_when_already_monotone() {
        let scores = [0.1, 0.4, 0.9];
        let correct = [false, true, true];
        let map = fit_isotonic(&scores, &correct).unwrap();
        let fitted: Vec<f64> = scores.iter().map(|&s| map.apply(s)).collect();
        assert_eq!(fitted, vec![0.0, 1.0, 1.0]);
        // No violators were pooled, but the two 1.0 levels are
        // indistinguishable after calibration: kappa' counts them together.
        assert_eq!(map.max_level_multiplicity(), 2);
    }

    #[test]
    fn pav_constant_targets() {
        let scores = [0.2, 0.5, 0.7];
        let map = fit_isotonic(&scores, &[true, true, true]).unwrap();
        for &s in &scores {
            assert_eq!(map.apply(s), 1.0);
        }
    }

    /// Exhaustive oracle: the monotone least-squares fit over all contiguous
    /// partitions with nondecreasing block means.
    fn brute_force_isotonic(scores: &[f64], ys: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
        let sorted_y: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
        let n = sorted_y.len();
        let mut best_sse = f64::INFINITY;
        let mut best_fit = vec![0.0; n];
        for mask in 0..(1u32 << (n - 1)) {
            let mut fit = Vec::with_capacity(n);
            let mut means = Vec::new();
            let mut start = 0usize;
            for end in 0..n {
                let boundary = end == n - 1 || (mask >> end) & 1 == 1;
                if boundary {
                    let m: f64 = sorted_y[start..=end].iter().sum::<f64>() / (end - start + 1) as f64;
                    means.push(m);
                    for _ in start..=end {
                        fit.push(m);
                    }
                    start = end + 1;
                }
            }
            if means.windows(2).any(|w| w[0] > w[1] + 1e-12) {
                continue;
            }
            let sse: f64 = fit.iter().zip(&sorted_y).map(|(a, b)| (a - b) * (a - b)).sum();
            if sse < best_sse - 1e-12 {
                best_sse = sse;
                best_fit = fit;
            }
        }
        // Undo the sort.
        let mut out = vec![0.0; n];
        for (rank, &i) in order.iter().enumerate() {
            out[i] = best_fit[rank];
        }
        out
    }

    #[test]
    fn pav_matches_exhaustive_search_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            let n = rng.gen_range(2..=8);
            let mut scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            scores.sort_by(f64::total_cmp);
            scores.dedup();
            let correct: Vec<bool> = (0..scores.len()).map(|_| rng.gen()).collect();
            let ys: Vec<f64> = correct.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
            let map = fit_isotonic(&scores, &correct).unwrap();
            let fitted: Vec<f64> = scores.iter().map(|&s| map.apply(s)).collect();
            let brute = brute_force_isotonic(&scores, &ys);
            for (a, b) in fitted.iter().zip(&brute) {
                assert!((a - b).abs() < 1e-9, "{fitted:?} vs {brute:?}");
            }
        }
    }

    #[test]
    fn injective_calibrators_leave_the_curve_unchanged() {
        // When the fitted map is injective on the evaluated scores the
        // acceptance sets cannot move. Isotonic: two points, two levels.
        let scored = [(0.2, false), (0.8, true)];
        let scores: Vec<f64> = scored.iter().map(|r| r.0).collect();
        let correct: Vec<bool> = scored.iter().map(|r| r.1).collect();
        let map = fit_isotonic(&scores, &correct).unwrap();
        assert_eq!(map.max_level_multiplicity(), 1);
        let base = empirical_curve(&scored).unwrap();
        let after =
            empirical_curve(&scored.map(|(s, c)| (map.apply(s), c))).unwrap();
        for (p, q) in base.points().iter().zip(after.points()) {
            assert_eq!((p.coverage, p.accuracy), (q.coverage, q.accuracy));
        }

        // Histogram with strictly increasing bin values: fit data puts i
        // correct samples out of 10 into bin i, so bin i maps to i/10.
        let mut fit_scores = Vec::new();
        let mut fit_correct = Vec::new();
        for bin in 0..10usize {
            for j in 0..10usize {
                fit_scores.push((bin as f64 + 0.5) / 10.0);
                fit_correct.push(j < bin);
            }
        }
        let hist = fit_histogram(&fit_scores, &fit_correct, 10).unwrap();
        let (_, values) = hist.bins();
        assert!(values.windows(2).all(|w| w[0] < w[1]));
        // One evaluated score per bin: the map is strictly increasing on
        // them, so the curve is unchanged point for point.
        let scored: Vec<(f64, bool)> =
            (0..10).map(|i| (0.03 + 0.1 * i as f64, i % 3 != 0)).collect();
        let base = empirical_curve(&scored).unwrap();
        let mapped: Vec<(f64, bool)> =
            scored.iter().map(|&(s, c)| (hist.apply(s), c)).collect();
        let after = empirical_curve(&mapped).unwrap();
        for (p, q) in base.points().iter().zip(after.points()) {
            assert_eq!((p.coverage, p.accuracy), (q.coverage, q.accuracy));
        }
    }

    #[test]
    fn flat_segments_stay_within_tie_slack() {
        // Collapsed levels reshuffle only the boundary tie group, so the
        // accuracy at a prefix of size k moves by at most kappa'/k, and by
        // at most kappa'/n once k >= n/2.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let n = rng.gen_range(10..60);
            let scored: Vec<(f64, bool)> =
                (0..n).map(|_| (rng.gen_range(0.0..1.0), rng.gen())).collect();
            let scores: Vec<f64> = scored.iter().map(|r| r.0).collect();
            let correct: Vec<bool> = scored.iter().map(|r| r.1).collect();
            let map = fit_isotonic(&scores, &correct).unwrap();
            let kappa = map.max_level_multiplicity() as f64;
            let base = empirical_curve(&scored).unwrap();
            let calibrated: Vec<(f64, bool)> =
                scored.iter().map(|&(s, c)| (map.apply(s), c)).collect();
            let after = empirical_curve(&calibrated).unwrap();
            for (k, (p, q)) in base.points().iter().zip(after.points()).enumerate() {
                let diff = (p.accuracy - q.accuracy).abs();
                assert!(
                    diff <= kappa / (k + 1) as f64 + 1e-12,
                    "accuracy moved by {diff} at prefix {} with kappa'={kappa}, n={n}",
                    k + 1
                );
                if 2 * (k + 1) >= n {
                    assert!(diff <= kappa / n as f64 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn ece_extremes() {
        // Confidence equal to the 0/1 outcome: perfectly calibrated.
        let conf = [1.0, 0.0, 1.0, 0.0];
        let correct = [true, false, true, false];
        let rep = ece(&conf, &correct, 15).unwrap();
        assert_eq!(rep.ece, 0.0);

        // All confident, half right.
        let conf = [1.0; 10];
        let correct: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let rep = ece(&conf, &correct, 15).unwrap();
        assert!((rep.ece - 0.5).abs() < 1e-12);
        assert_eq!(rep.bins.iter().map(|b| b.count).sum::<usize>(), 10);
    }

    #[test]
    fn ece_csv_footer() {
        let rep = ece(&[0.5, 0.75], &[true, false], 4).unwrap();
        let text = rep.to_csv();
        assert!(text.starts_with("bin_lo,bin_hi,count,mean_conf,accuracy\n"));
        assert!(text.lines().last().unwrap().starts_with("ece,"));
        assert_eq!(text.lines().count(), 6);
    }

    proptest! {
        #[test]
        fn ece_is_bounded(
            rows in prop::collection::vec((0.0..=1.0f64, any::<bool>()), 1..100),
            n_bins in 1usize..40,
        ) {
            let conf: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let correct: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let rep = ece(&conf, &correct, n_bins).unwrap();
            prop_assert!((0.0..=1.0).contains(&rep.ece));
            prop_assert_eq!(rep.bins.iter().map(|b| b.count).sum::<usize>(), rows.len());
        }

        #[test]
        fn isotonic_fit_is_monotone(
            rows in prop::collection::vec((0.0..=1.0f64, any::<bool>()), 1..80),
        ) {
            let scores: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let correct: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let map = fit_isotonic(&scores, &correct).unwrap();
            let (_, values) = map.levels();
            for w in values.windows(2) {
                prop_assert!(w[0] <= w[1] + 1e-12);
            }
            for v in values {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }
    }
}
