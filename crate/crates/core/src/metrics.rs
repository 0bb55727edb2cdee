//! Classification metrics, overlap scores for masks, and the two-sided
//! Wilcoxon rank-sum test.
//!
//! Degenerate denominators never panic and never abort a batch: the affected
//! score is reported as 0 with `degenerate` set, so a run over many seeds can
//! keep going and still show which repetitions hit an empty class.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::volumetrics::Mask;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("truth has {0} entries, predictions have {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("mask dimensions {0:?} and {1:?} differ")]
    DimMismatch((usize, usize, usize), (usize, usize, usize)),
}

/// Row-per-truth-class, column-per-predicted-class count matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn get(&self, truth: usize, predicted: usize) -> usize {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|row| row.iter().sum::<usize>()).sum()
    }
}

/// Accuracy, precision, recall, and F1 in [0, 1]. `degenerate` marks that at
/// least one score had an empty denominator and was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(precision: f64, recall: f64, degenerate: &mut bool) -> f64 {
    if precision + recall == 0.0 {
        *degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Compute metrics and the confusion matrix for a pair of label sequences.
///
/// With one or two classes the scores are binary with respect to
/// `positive_class`; with more classes, precision/recall/F1 are unweighted
/// (macro) means of the per-class scores and `positive_class` is ignored.
pub fn classification_metrics(
    truth: &[usize],
    predicted: &[usize],
    positive_class: usize,
) -> Result<(Metrics, ConfusionMatrix), MetricsError> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n_classes = truth
        .iter()
        .chain(predicted)
        .copied()
        .max()
        .unwrap()
        .max(positive_class)
        + 1;
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        counts[t][p] += 1;
    }
    let matrix = ConfusionMatrix { n_classes, counts };

    let mut degenerate = false;
    let correct: usize = (0..n_classes).map(|c| matrix.get(c, c)).sum();
    let accuracy = correct as f64 / truth.len() as f64;

    let class_scores = |class: usize, degenerate: &mut bool| -> (f64, f64, f64) {
        let tp = matrix.get(class, class);
        let fp: usize = (0..n_classes).filter(|&t| t != class).map(|t| matrix.get(t, class)).sum();
        let fn_: usize = (0..n_classes).filter(|&p| p != class).map(|p| matrix.get(class, p)).sum();
        let precision = ratio(tp, tp + fp, degenerate);
        let recall = ratio(tp, tp + fn_, degenerate);
        let f1 = f1_of(precision, recall, degenerate);
        (precision, recall, f1)
    };

    let (precision, recall, f1) = if n_classes <= 2 {
        class_scores(positive_class, &mut degenerate)
    } else {
        let mut sums = (0.0, 0.0, 0.0);
        for class in 0..n_classes {
            let (p, r, f) = class_scores(class, &mut degenerate);
            sums.0 += p;
            sums.1 += r;
            sums.2 += f;
        }
        let k = n_classes as f64;
        (sums.0 / k, sums.1 / k, sums.2 / k)
    };

    Ok((Metrics { accuracy, precision, recall, f1, degenerate }, matrix))
}

/// One-line report form: `accuracy,precision,recall,f1` at six decimals.
pub fn metrics_record(m: &Metrics) -> String {
    format!("{:.6},{:.6},{:.6},{:.6}", m.accuracy, m.precision, m.recall, m.f1)
}

/// An overlap score with a vacuity marker: two empty masks agree perfectly
/// by convention (the raw formulas are 0/0 there), and `vacuous` records that
/// the convention fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapScore {
    pub value: f64,
    pub vacuous: bool,
}

fn overlap_counts(x: &Mask, y: &Mask) -> Result<(usize, usize, usize), MetricsError> {
    if x.dims() != y.dims() {
        return Err(MetricsError::DimMismatch(x.dims(), y.dims()));
    }
    let mut intersection = 0usize;
    let (mut nx, mut ny) = (0usize, 0usize);
    for (&a, &b) in x.bits.iter().zip(&y.bits) {
        if a {
            nx += 1;
        }
        if b {
            ny += 1;
        }
        if a && b {
            intersection += 1;
        }
    }
    Ok((intersection, nx, ny))
}

/// Dice coefficient `2|X∩Y| / (|X| + |Y|)`.
pub fn dice(x: &Mask, y: &Mask) -> Result<OverlapScore, MetricsError> {
    let (intersection, nx, ny) = overlap_counts(x, y)?;
    if nx + ny == 0 {
        return Ok(OverlapScore { value: 1.0, vacuous: true });
    }
    Ok(OverlapScore { value: 2.0 * intersection as f64 / (nx + ny) as f64, vacuous: false })
}

/// Jaccard index `|X∩Y| / |X∪Y|`.
pub fn iou(x: &Mask, y: &Mask) -> Result<OverlapScore, MetricsError> {
    let (intersection, nx, ny) = overlap_counts(x, y)?;
    let union = nx + ny - intersection;
    if union == 0 {
        return Ok(OverlapScore { value: 1.0, vacuous: true });
    }
    Ok(OverlapScore { value: intersection as f64 / union as f64, vacuous: false })
}

/// Which p-value route [`wilcoxon_ranksum`] took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSumMethod {
    /// Full enumeration of rank splits; used for small tie-free inputs.
    Exact,
    /// Normal approximation with tie-corrected variance and a 0.5 continuity
    /// correction.
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumResult {
    /// Signed as sample 1 minus its null expectation: the centered rank sum
    /// under [`RankSumMethod::Exact`], the standardized z under
    /// [`RankSumMethod::NormalApprox`].
    pub statistic: f64,
    /// Two-sided p-value in (0, 1].
    pub p_value: f64,
    pub method: RankSumMethod,
}

/// Midranks of the pooled sample: ties share the mean of the rank positions
/// they occupy. Returned in pooled order (a first, then b).
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].partial_cmp(&pooled[j]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the midrank of 1-based ranks.
        let midrank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = midrank;
        }
        i = j + 1;
    }
    ranks
}

/// Count k-subsets of the integer ranks 1..=n by doubled sum, so half-integer
/// thresholds can be compared exactly. `table[s2]` is the number of subsets
/// of size `k` whose doubled rank sum is `s2`.
fn subset_sum_counts(n: usize, k: usize) -> Vec<u128> {
    let max2 = n * (n + 1); // doubled maximum sum
    let mut table = vec![vec![0u128; max2 + 1]; k + 1];
    table[0][0] = 1;
    for rank in 1..=n {
        let add = 2 * rank;
        for size in (1..=k).rev() {
            for s2 in (add..=max2).rev() {
                let from = table[size - 1][s2 - add];
                if from != 0 {
                    table[size][s2] += from;
                }
            }
        }
    }
    table.swap_remove(k)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result
}

/// Two-sided Wilcoxon rank-sum test on two independent samples.
///
/// Ranks are midranks. With 20 or fewer pooled values and no ties the
/// p-value is exact: the probability, over all equally likely rank splits,
/// of a rank sum at least as far from its expectation as the observed one.
/// Otherwise the normal approximation is used, with tie-corrected variance
/// and a 0.5 continuity correction. Identical samples give p = 1.
pub fn wilcoxon_ranksum(a: &[f64], b: &[f64]) -> Result<RankSumResult, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Empty);
    }
    let na = a.len();
    let nb = b.len();
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let w: f64 = ranks[..na].iter().sum();
    let mean = na as f64 * (n + 1) as f64 / 2.0;

    let mut sorted = pooled.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let has_ties = sorted.windows(2).any(|p| p[0] == p[1]);

    if n <= 20 && !has_ties {
        // All ranks are integers; work with doubled sums to keep the
        // comparison against the half-integer mean exact.
        let w2 = (2.0 * w).round() as usize;
        let mean2 = na * (n + 1);
        let observed_dev = (w2 as i64 - mean2 as i64).unsigned_abs();
        let counts = subset_sum_counts(n, na);
        let mut extreme: u128 = 0;
        for (s2, &count) in counts.iter().enumerate() {
            if count != 0 && (s2 as i64 - mean2 as i64).unsigned_abs() >= observed_dev {
                extreme += count;
            }
        }
        let total = binomial(n, na);
        return Ok(RankSumResult {
            statistic: w - mean,
            p_value: extreme as f64 / total as f64,
            method: RankSumMethod::Exact,
        });
    }

    // Tie-corrected variance of the rank sum.
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let nf = n as f64;
    let variance = (na as f64 * nb as f64 / 12.0) * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if variance <= 0.0 {
        // Every pooled value identical: no evidence of a shift.
        return Ok(RankSumResult { statistic: 0.0, p_value: 1.0, method: RankSumMethod::NormalApprox });
    }
    let centered = w - mean;
    let corrected = if centered > 0.0 {
        centered - 0.5
    } else if centered < 0.0 {
        centered + 0.5
    } else {
        0.0
    };
    let z = corrected / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let p = (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0);
    Ok(RankSumResult { statistic: z, p_value: p, method: RankSumMethod::NormalApprox })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_metrics_worked_example() {
        let truth = [1, 1, 0, 0];
        let predicted = [1, 0, 0, 0];
        let (m, cm) = classification_metrics(&truth, &predicted, 1).unwrap();
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.accuracy, 0.75);
        assert!(!m.degenerate);
        assert_eq!(cm.get(1, 1), 1);
        assert_eq!(cm.get(1, 0), 1);
        assert_eq!(cm.get(0, 0), 2);
        assert_eq!(cm.get(0, 1), 0);
    }

    #[test]
    fn all_negative_predictions_are_degenerate_not_fatal() {
        let truth = [0, 0, 1];
        let predicted = [0, 0, 0];
        let (m, _) = classification_metrics(&truth, &predicted, 1).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!(m.degenerate);
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn f1_is_harmonic_mean_when_defined() {
        let truth = [1, 1, 1, 0, 0, 0, 1, 0];
        let predicted = [1, 0, 1, 1, 0, 0, 1, 0];
        let (m, _) = classification_metrics(&truth, &predicted, 1).unwrap();
        let harmonic = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        assert!((m.f1 - harmonic).abs() < 1e-15);
        assert!(m.f1 >= m.precision.min(m.recall) && m.f1 <= m.precision.max(m.recall));
    }

    #[test]
    fn macro_average_over_three_classes() {
        let truth = [0, 1, 2, 2];
        let predicted = [0, 2, 2, 1];
        let (m, cm) = classification_metrics(&truth, &predicted, 0).unwrap();
        assert_eq!(cm.n_classes, 3);
        assert_eq!(m.accuracy, 0.5);
        // class 0: P=1, R=1, F1=1; class 1: P=0, R=0, F1=0 (degenerate);
        // class 2: P=0.5, R=0.5, F1=0.5.
        assert!((m.precision - 0.5).abs() < 1e-15);
        assert!((m.recall - 0.5).abs() < 1e-15);
        assert!((m.f1 - 0.5).abs() < 1e-15);
        assert!(m.degenerate);
    }

    #[test]
    fn length_mismatch_and_empty_are_errors() {
        assert!(classification_metrics(&[0, 1], &[0], 1).is_err());
        assert!(classification_metrics(&[], &[], 1).is_err());
    }

    #[test]
    fn record_has_six_decimals() {
        let m = Metrics { accuracy: 129.0 / 137.0, precision: 0.0, recall: 0.0, f1: 0.0, degenerate: true };
        assert_eq!(metrics_record(&m), "0.941606,0.000000,0.000000,0.000000");
    }

    fn mask_of(bits: &[bool]) -> Mask {
        Mask { nx: bits.len(), ny: 1, nz: 1, bits: bits.to_vec() }
    }

    #[test]
    fn dice_and_iou_basic() {
        let x = mask_of(&[true, true, true, false]);
        let y = mask_of(&[true, true, false, true]);
        // |X∩Y| = 2, |X| = |Y| = 3, |X∪Y| = 4.
        assert_eq!(dice(&x, &y).unwrap().value, 2.0 * 2.0 / 6.0);
        assert_eq!(iou(&x, &y).unwrap().value, 2.0 / 4.0);
    }

    #[test]
    fn identical_masks_score_one() {
        let x = mask_of(&[true, false, true]);
        assert_eq!(dice(&x, &x).unwrap(), OverlapScore { value: 1.0, vacuous: false });
        assert_eq!(iou(&x, &x).unwrap(), OverlapScore { value: 1.0, vacuous: false });
    }

    #[test]
    fn disjoint_masks_score_zero() {
        let x = mask_of(&[true, false]);
        let y = mask_of(&[false, true]);
        assert_eq!(dice(&x, &y).unwrap().value, 0.0);
        assert_eq!(iou(&x, &y).unwrap().value, 0.0);
    }

    #[test]
    fn both_empty_is_vacuously_perfect() {
        let x = mask_of(&[false, false]);
        assert_eq!(dice(&x, &x).unwrap(), OverlapScore { value: 1.0, vacuous: true });
        assert_eq!(iou(&x, &x).unwrap(), OverlapScore { value: 1.0, vacuous: true });
    }

    #[test]
    fn mismatched_dims_are_an_error() {
        let x = mask_of(&[true]);
        let y = mask_of(&[true, false]);
        assert!(dice(&x, &y).is_err());
        assert!(iou(&x, &y).is_err());
    }

    #[test]
    fn exact_ranksum_on_separated_triples() {
        let r = wilcoxon_ranksum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.method, RankSumMethod::Exact);
        assert_eq!(r.p_value, 0.1); // 2 of the 20 rank splits are this extreme
        assert_eq!(r.statistic, 6.0 - 10.5);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let a = [1.0, 2.0, 2.0, 3.0];
        let r = wilcoxon_ranksum(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.statistic, 0.0);
        // Ties force the approximate route even at this size.
        assert_eq!(r.method, RankSumMethod::NormalApprox);
    }

    #[test]
    fn constant_pooled_sample_gives_p_one() {
        let r = wilcoxon_ranksum(&[5.0; 4], &[5.0; 3]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64 + 0.5).collect();
        let r = wilcoxon_ranksum(&a, &b).unwrap();
        assert_eq!(r.method, RankSumMethod::NormalApprox);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        assert!(r.statistic < 0.0); // sample 1 sits lower
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(wilcoxon_ranksum(&[], &[1.0]).is_err());
    }

    #[test]
    fn midranks_average_tied_positions() {
        let ranks = midranks(&[2.0, 1.0, 2.0, 3.0]);
        assert_eq!(ranks, vec![2.5, 1.0, 2.5, 4.0]);
    }
}
