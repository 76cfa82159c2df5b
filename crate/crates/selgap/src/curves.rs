//! Empirical accuracy-coverage curves, the perfect-ordering oracle bound,
//! the per-coverage gap, and the integral metrics AURC / E-AURC.

use crate::error::{Error, Result};
use crate::io_util::fmt_f64;
use std::path::Path;

/// One point of the empirical curve: the prefix of the `coverage * n`
/// highest-scoring samples, its selective accuracy, and the score of the
/// last sample accepted into the prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub coverage: f64,
    pub accuracy: f64,
    pub threshold: f64,
}

/// The empirical accuracy-coverage curve on the exact prefix grid
/// k/n for k = 1..n. The last point always has coverage 1 and accuracy equal
/// to the full-coverage accuracy. (The zero-coverage convention "accuracy 0"
/// is unreachable here: the prefix grid starts at k = 1.)
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    points: Vec<CurvePoint>,
    n: usize,
    a_full: f64,
}

impl CoverageCurve {
    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Full-coverage accuracy.
    pub fn a_full(&self) -> f64 {
        self.a_full
    }

    /// Selective accuracy at target coverage `c`: the prefix of size
    /// ceil(c * n).
    pub fn accuracy_at(&self, c: f64) -> Result<f64> {
        let k = prefix_size(self.n, c)?;
        Ok(self.points[k - 1].accuracy)
    }

    /// Serialize as CSV (`coverage,accuracy,threshold`) with an
    /// `aurc,<value>` footer row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("coverage,accuracy,threshold\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(p.coverage),
                fmt_f64(p.accuracy),
                fmt_f64(p.threshold)
            ));
        }
        out.push_str(&format!("aurc,{}\n", fmt_f64(aurc(self))));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_csv())
    }
}

/// The realized curve against the oracle frontier, plus the area between
/// them (E-AURC).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    pub coverage: f64,
    pub oracle_acc: f64,
    pub realized_acc: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCurve {
    points: Vec<GapPoint>,
    e_aurc: f64,
}

impl GapCurve {
    pub fn points(&self) -> &[GapPoint] {
        &self.points
    }

    pub fn e_aurc(&self) -> f64 {
        self.e_aurc
    }

    /// Serialize as CSV (`coverage,oracle,realized,gap`) with an
    /// `e_aurc,<value>` footer row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("coverage,oracle,realized,gap\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(p.coverage),
                fmt_f64(p.oracle_acc),
                fmt_f64(p.realized_acc),
                fmt_f64(p.gap)
            ));
        }
        out.push_str(&format!("e_aurc,{}\n", fmt_f64(self.e_aurc)));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_csv())
    }
}

/// Ranking order used everywhere a top-k acceptance set is built: stable
/// sort by score descending, breaking ties by original index ascending.
pub fn ranked_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx
}

/// Largest number of samples sharing one score value (the tie multiplicity
/// kappa in the tie-slack bound kappa/n).
pub fn max_tie_multiplicity(scores: &[f64]) -> usize {
    if scores.is_empty() {
        return 0;
    }
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = 1;
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0].to_bits() == w[1].to_bits() {
            run += 1;
            best = best.max(run);
        } else {
            run = 1;
        }
    }
    best
}

/// Prefix size ceil(c * n) for a target coverage c in (0, 1].
pub(crate) fn prefix_size(n: usize, c: f64) -> Result<usize> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::invalid("coverage", format!("{c} outside (0, 1]")));
    }
    Ok(((c * n as f64).ceil() as usize).clamp(1, n))
}

/// Build the empirical accuracy-coverage curve from per-sample
/// (score, correct) rows: one point per accepted-prefix size k = 1..n, with
/// coverage k/n, the accuracy of the top-k prefix, and the k-th score as
/// the threshold.
pub fn empirical_curve(scored: &[(f64, bool)]) -> Result<CoverageCurve> {
    if scored.is_empty() {
        return Err(Error::EmptySelection("empirical curve of no samples".into()));
    }
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::invalid("scored", "scores must not be NaN"));
    }
    let scores: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
    let order = ranked_indices(&scores);
    let n = scored.len();
    let mut points = Vec::with_capacity(n);
    let mut correct = 0usize;
    for (k, &i) in order.iter().enumerate() {
        if scored[i].1 {
            correct += 1;
        }
        points.push(CurvePoint {
            coverage: (k + 1) as f64 / n as f64,
            accuracy: correct as f64 / (k + 1) as f64,
            threshold: scored[i].0,
        });
    }
    let a_full = correct as f64 / n as f64;
    Ok(CoverageCurve { points, n, a_full })
}

/// Best selective accuracy achievable at coverage `c` by a classifier with
/// full-coverage accuracy `a_full`, under perfect ordering: 1 while the
/// accepted mass fits inside the correct predictions, a_full / c beyond.
pub fn oracle_bound(a_full: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a_full) {
        return Err(Error::invalid("a_full", format!("{a_full} outside [0, 1]")));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::invalid("coverage", format!("{c} outside (0, 1]")));
    }
    Ok(if c <= a_full { 1.0 } else { a_full / c })
}

/// Integrate `values` over the prefix coverage grid of `n` points: the first
/// prefix value extends as a rectangle down to zero coverage, then
/// trapezoids between consecutive prefixes. A constant integrand therefore
/// integrates to itself.
fn prefix_integral(values: &[f64], n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut total = values[0] * h;
    for w in values.windows(2) {
        total += 0.5 * (w[0] + w[1]) * h;
    }
    total
}

/// Per-coverage gap between the oracle frontier (at the curve's own a_full)
/// and the realized curve, with the E-AURC (the integral of the gap over
/// coverage).
pub fn gap_curve(curve: &CoverageCurve) -> GapCurve {
    let points: Vec<GapPoint> = curve
        .points
        .iter()
        .map(|p| {
            let oracle_acc =
                oracle_bound(curve.a_full, p.coverage).expect("curve coverages are valid");
            GapPoint {
                coverage: p.coverage,
                oracle_acc,
                realized_acc: p.accuracy,
                gap: oracle_acc - p.accuracy,
            }
        })
        .collect();
    let gaps: Vec<f64> = points.iter().map(|p| p.gap).collect();
    let e_aurc = prefix_integral(&gaps, curve.n);
    GapCurve { points, e_aurc }
}

/// Area under the risk-coverage curve: the integral of (1 - accuracy) over
/// coverage on the prefix grid.
pub fn aurc(curve: &CoverageCurve) -> f64 {
    let risks: Vec<f64> = curve.points.iter().map(|p| 1.0 - p.accuracy).collect();
    prefix_integral(&risks, curve.n)
}

/// Finite-sample slack 3 * sqrt(log(6/delta) / (2n)): three Hoeffding terms
/// at epsilon = sqrt(log(6/delta) / (2n)) joined by a union bound.
pub fn stat_slack(n: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} outside (0, 1)")));
    }
    Ok(3.0 * ((6.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn four_point() -> CoverageCurve {
        empirical_curve(&[(0.9, true), (0.8, true), (0.7, false), (0.6, true)]).unwrap()
    }

    #[test]
    fn enumerated_curve_matches_definition() {
        let curve = four_point();
        let pts = curve.points();
        let expect = [(0.25, 1.0), (0.5, 1.0), (0.75, 2.0 / 3.0), (1.0, 0.75)];
        for (p, (c, a)) in pts.iter().zip(expect) {
            assert_eq!(p.coverage, c);
            assert!((p.accuracy - a).abs() < 1e-15);
        }
        assert_eq!(curve.a_full(), 0.75);
        // thresholds are the sorted scores
        let thresholds: Vec<f64> = pts.iter().map(|p| p.threshold).collect();
        assert_eq!(thresholds, vec![0.9, 0.8, 0.7, 0.6]);
    }

    #[test]
    fn all_correct_is_flat_at_one() {
        let curve = empirical_curve(&[(0.1, true), (0.5, true), (0.3, true)]).unwrap();
        assert!(curve.points().iter().all(|p| p.accuracy == 1.0));
        assert_eq!(aurc(&curve), 0.0);
    }

    #[test]
    fn tied_scores_fall_back_to_input_order() {
        let curve = empirical_curve(&[(0.5, true), (0.5, false)]).unwrap();
        let pts = curve.points();
        assert_eq!((pts[0].coverage, pts[0].accuracy), (0.5, 1.0));
        assert_eq!((pts[1].coverage, pts[1].accuracy), (1.0, 0.5));
    }

    #[test]
    fn oracle_bound_branches() {
        assert_eq!(oracle_bound(0.4, 0.2).unwrap(), 1.0);
        assert_eq!(oracle_bound(0.4, 0.8).unwrap(), 0.5);
        for c in [0.01, 0.37, 1.0] {
            assert_eq!(oracle_bound(1.0, c).unwrap(), 1.0);
        }
        assert!(oracle_bound(0.4, 0.0).is_err());
        assert!(oracle_bound(0.4, -0.3).is_err());
        assert!(oracle_bound(0.4, 1.2).is_err());
        assert!(oracle_bound(1.4, 0.5).is_err());
    }

    #[test]
    fn perfect_ordering_has_zero_gap() {
        let curve = empirical_curve(&[(0.9, true), (0.8, true), (0.2, false), (0.1, false)]).unwrap();
        let gap = gap_curve(&curve);
        for p in gap.points() {
            assert!(p.gap.abs() < 1e-15, "gap at {} is {}", p.coverage, p.gap);
        }
        assert!(gap.e_aurc().abs() < 1e-15);
    }

    #[test]
    fn worst_ordering_gap_is_one_at_half_coverage() {
        let curve = empirical_curve(&[(0.9, false), (0.8, false), (0.2, true), (0.1, true)]).unwrap();
        let gap = gap_curve(&curve);
        let p = &gap.points()[1];
        assert_eq!(p.coverage, 0.5);
        assert_eq!(p.oracle_acc, 1.0);
        assert_eq!(p.realized_acc, 0.0);
        assert_eq!(p.gap, 1.0);
    }

    #[test]
    fn gap_vanishes_at_full_coverage() {
        for scored in [
            vec![(0.9, false), (0.8, true), (0.2, true)],
            vec![(0.5, true), (0.5, false)],
            vec![(0.1, false), (0.2, false)],
        ] {
            let gap = gap_curve(&empirical_curve(&scored).unwrap());
            assert!(gap.points().last().unwrap().gap.abs() < 1e-15);
        }
    }

    #[test]
    fn constant_accuracy_aurc_is_one_minus_a() {
        // Alternate correct/incorrect so every prefix of even size has
        // accuracy 1/2 -- close enough: use all-correct and all-wrong
        // constants instead, where the curve is exactly flat.
        let all_wrong = empirical_curve(&[(0.3, false), (0.2, false), (0.1, false)]).unwrap();
        assert!((aurc(&all_wrong) - 1.0).abs() < 1e-15);
        let all_right = empirical_curve(&[(0.3, true), (0.2, true)]).unwrap();
        assert_eq!(aurc(&all_right), 0.0);
    }

    #[test]
    fn four_point_aurc_matches_hand_integral() {
        // Rectangle [0, 1/4] at risk 0, then trapezoids over the prefix
        // grid: 1/4*(0+0)/2 + 1/4*(0+1/3)/2 + 1/4*(1/3+1/4)/2 = 11/96.
        let curve = four_point();
        assert!((aurc(&curve) - 11.0 / 96.0).abs() < 1e-15);
    }

    #[test]
    fn stat_slack_formula_and_monotonicity() {
        let s = stat_slack(10_000, 0.05).unwrap();
        let expect = 3.0 * ((120.0_f64).ln() / 20_000.0).sqrt();
        assert!((s - expect).abs() < 1e-15);
        assert!((s - 0.0464).abs() < 1e-4);
        assert!(stat_slack(100, 0.05).unwrap() > stat_slack(10_000, 0.05).unwrap());
        assert!(stat_slack(100, 0.01).unwrap() > stat_slack(100, 0.2).unwrap());
        assert!(stat_slack(0, 0.05).is_err());
        assert!(stat_slack(10, 1.5).is_err());
    }

    #[test]
    fn curve_csv_has_footer() {
        let text = four_point().to_csv();
        assert!(text.starts_with("coverage,accuracy,threshold\n"));
        assert!(text.lines().last().unwrap().starts_with("aurc,"));
        let gap_text = gap_curve(&four_point()).to_csv();
        assert!(gap_text.starts_with("coverage,oracle,realized,gap\n"));
        assert!(gap_text.lines().last().unwrap().starts_with("e_aurc,"));
    }

    proptest! {
        /// Strictly increasing transforms leave (coverage, accuracy) points
        /// bit-identical: the acceptance sets cannot change.
        #[test]
        fn monotone_transform_leaves_curve_unchanged(
            rows in prop::collection::vec((0.0..1.0f64, any::<bool>()), 1..80),
            scale in 0.1..5.0f64,
            offset in -2.0..2.0f64,
        ) {
            let transformed: Vec<(f64, bool)> = rows
                .iter()
                .map(|&(s, c)| (scale * s + offset + (s * 0.5).exp(), c))
                .collect();
            let a = empirical_curve(&rows).unwrap();
            let b = empirical_curve(&transformed).unwrap();
            prop_assert_eq!(a.points().len(), b.points().len());
            for (p, q) in a.points().iter().zip(b.points()) {
                prop_assert_eq!(p.coverage.to_bits(), q.coverage.to_bits());
                prop_assert_eq!(p.accuracy.to_bits(), q.accuracy.to_bits());
            }
        }

        /// Prefix accuracy times prefix size is an integer count.
        #[test]
        fn prefix_accuracy_identity(
            rows in prop::collection::vec((0.0..1.0f64, any::<bool>()), 1..60),
        ) {
            let curve = empirical_curve(&rows).unwrap();
            for (k, p) in curve.points().iter().enumerate() {
                let count = p.accuracy * (k + 1) as f64;
                prop_assert!((count - count.round()).abs() < 1e-9);
            }
        }

        /// Realized accuracy never beats the oracle frontier by more than
        /// the tie slack kappa/n; the gap and E-AURC obey the same floor.
        #[test]
        fn oracle_dominance_with_tie_slack(
            rows in prop::collection::vec((0.0..0.2f64, any::<bool>()), 2..60),
        ) {
            // Coarse scores force plenty of ties.
            let quantized: Vec<(f64, bool)> = rows
                .iter()
                .map(|&(s, c)| ((s * 10.0).round() / 10.0, c))
                .collect();
            let scores: Vec<f64> = quantized.iter().map(|r| r.0).collect();
            let kappa = max_tie_multiplicity(&scores) as f64;
            let n = quantized.len() as f64;
            let curve = empirical_curve(&quantized).unwrap();
            let gap = gap_curve(&curve);
            for p in gap.points() {
                prop_assert!(p.realized_acc <= p.oracle_acc + kappa / n + 1e-12);
                prop_assert!(p.gap >= -kappa / n - 1e-12);
            }
            prop_assert!(gap.e_aurc() >= -kappa / n - 1e-12);
        }

        /// The curve endpoint equals the full-coverage accuracy exactly.
        #[test]
        fn endpoint_is_full_accuracy(
            rows in prop::collection::vec((0.0..1.0f64, any::<bool>()), 1..60),
        ) {
            let curve = empirical_curve(&rows).unwrap();
            let last = curve.points().last().unwrap();
            prop_assert_eq!(last.coverage, 1.0);
            prop_assert_eq!(last.accuracy, curve.a_full());
            let manual = rows.iter().filter(|r| r.1).count() as f64 / rows.len() as f64;
            prop_assert_eq!(curve.a_full(), manual);
        }

        /// Thresholds are non-increasing along the curve.
        #[test]
        fn thresholds_non_increasing(
            rows in prop::collection::vec((0.0..1.0f64, any::<bool>()), 1..60),
        ) {
            let curve = empirical_curve(&rows).unwrap();
            for w in curve.points().windows(2) {
                prop_assert!(w[0].threshold >= w[1].threshold);
            }
        }
    }
}
