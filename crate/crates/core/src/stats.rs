//! Statistical primitives: Wilcoxon signed-rank test (exact and normal
//! approximation), rank-based ROC-AUC, precision/recall/F1, and the
//! F1-maximizing threshold sweep.

use thiserror::Error;

/// Largest effective sample size for which the exact null distribution of the
/// signed-rank statistic is used; above it the tie-corrected normal
/// approximation with continuity correction takes over.
pub const WILCOXON_EXACT_CUTOFF: usize = 25;

/// Grid the decision threshold is swept over: 0.05, 0.10, ..., 0.95.
pub const THRESHOLD_GRID_STEP: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("need at least one positive and one negative label")]
    SingleClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMode {
    Exact,
    NormalApprox,
}

/// Outcome of the two-sided Wilcoxon signed-rank test.
#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// Pairs remaining after zero differences are dropped.
    pub n_effective: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_two_sided: f64,
    pub mode: WilcoxonMode,
    /// All differences were zero; `p_two_sided` is defined as 1.0.
    pub degenerate: bool,
}

/// Two-sided Wilcoxon signed-rank test on paired differences.
///
/// Zero differences are dropped, absolute values are ranked with average
/// ranks on ties, and the two-sided p-value is
/// `min(1, 2 * min(P(W+ <= w), P(W+ >= w)))` under the null distribution:
/// exact for `n_effective <= 25`, tie-corrected normal approximation with
/// continuity correction 0.5 otherwise.
pub fn wilcoxon_signed_rank(differences: &[f64]) -> Result<WilcoxonResult, StatsError> {
    if differences.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if differences.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let nonzero: Vec<f64> = differences.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n_effective: 0,
            w_plus: 0.0,
            w_minus: 0.0,
            p_two_sided: 1.0,
            mode: WilcoxonMode::Exact,
            degenerate: true,
        });
    }

    let ranks = average_ranks(&nonzero.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let (p_two_sided, mode) = if n <= WILCOXON_EXACT_CUTOFF {
        (exact_two_sided_p(&ranks, w_plus), WilcoxonMode::Exact)
    } else {
        (normal_two_sided_p(&ranks, w_plus), WilcoxonMode::NormalApprox)
    };

    Ok(WilcoxonResult {
        n_effective: n,
        w_plus,
        w_minus,
        p_two_sided,
        mode,
        degenerate: false,
    })
}

/// Ranks of `values` (1-based), assigning tied values the average of the
/// ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the average of ranks i+1 ..= j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Exact two-sided p-value for the signed-rank statistic.
///
/// Ranks are doubled to integers (average ranks are multiples of 0.5) and the
/// full null distribution of W+ over all 2^n sign assignments is accumulated
/// by dynamic programming; all counts stay below 2^53 so the arithmetic is
/// exact.
fn exact_two_sided_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max_sum + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        reach += r;
        for s in (r..=reach).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w2 = (2.0 * w_plus).round() as usize;
    let total = 2.0f64.powi(ranks.len() as i32);
    let p_le: f64 = counts[..=w2].iter().sum::<f64>() / total;
    let p_ge: f64 = counts[w2..].iter().sum::<f64>() / total;
    (2.0 * p_le.min(p_ge)).min(1.0)
}

/// Normal approximation with tie-corrected variance and continuity
/// correction.
fn normal_two_sided_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    // tie counts from the rank multiset
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let sd = var.sqrt();
    // 2 * min(P(W+ <= w), P(W+ >= w)) collapses to a single tail of |z|,
    // which keeps p(d) and p(-d) bit-identical.
    let z = (w_plus - mean).abs();
    erfc((z - 0.5) / (sd * std::f64::consts::SQRT_2)).min(1.0)
}

/// Standard normal CDF via a Chebyshev fit of the complementary error
/// function (fractional error below 1.2e-7).
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.5 * x.abs());
    let poly = -x * x - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let ans = t * poly.exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Scored items with binary ground-truth labels.
#[derive(Debug, Clone, Default)]
pub struct ClassificationScores {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ClassificationScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Self {
        assert_eq!(scores.len(), labels.len(), "scores and labels must pair up");
        Self { scores, labels }
    }
}

/// Rank-based (Mann-Whitney) ROC-AUC; tied scores contribute half a
/// concordance per tied positive/negative pair.
pub fn roc_auc(scores: &ClassificationScores) -> Result<f64, StatsError> {
    if scores.scores.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if scores.scores.iter().any(|s| !s.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n_pos = scores.labels.iter().filter(|&&l| l == 1).count();
    let n_neg = scores.labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(StatsError::SingleClass);
    }
    let ranks = average_ranks(&scores.scores);
    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(&scores.labels)
        .filter(|(_, &l)| l == 1)
        .map(|(r, _)| *r)
        .sum();
    let numerator = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(numerator / (n_pos as f64 * n_neg as f64))
}

/// Precision, recall, and F1 at threshold `tau`, predicting positive iff
/// `score > tau` (strict). Zero denominators yield zeros.
pub fn precision_recall_f1(scores: &ClassificationScores, tau: f64) -> (f64, f64, f64) {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (s, &l) in scores.scores.iter().zip(&scores.labels) {
        let pred = *s > tau;
        match (pred, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Sweeps the threshold grid 0.05..=0.95 and returns the smallest `tau`
/// achieving the maximal F1, together with that F1.
pub fn threshold_sweep(scores: &ClassificationScores) -> (f64, f64) {
    let mut best_tau = THRESHOLD_GRID_STEP;
    let mut best_f1 = f64::NEG_INFINITY;
    for i in 1..=19 {
        let tau = i as f64 * THRESHOLD_GRID_STEP;
        let (_, _, f1) = precision_recall_f1(scores, tau);
        if f1 > best_f1 {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    (best_tau, best_f1)
}

/// Median of `values`; the average of the two central order statistics for
/// even lengths. Panics on empty input.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}
