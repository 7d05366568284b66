use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{EvalError, Result};

/// Largest number of nonzero differences for which the exact null is used.
pub const EXACT_MAX_N: usize = 25;
/// Fewest nonzero differences accepted by the test.
pub const MIN_N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`
    pub statistic: f64,
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    /// Number of nonzero differences.
    pub n: usize,
    /// Two-sided p-value.
    pub p_value: f64,
    pub exact: bool,
}

/// Average ranks (1-based) of `values`, plus the sizes of tie groups.
fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(EvalError::InvalidInput(format!(
            "paired samples of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    wilcoxon_from_differences(&diffs)
}

/// Signed-rank test on differences directly. Zero differences are dropped,
/// tied magnitudes share their average rank.
pub fn wilcoxon_from_differences(diffs: &[f64]) -> Result<WilcoxonResult> {
    if let Some(d) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(EvalError::InvalidInput(format!(
            "non-finite difference {d}"
        )));
    }
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Err(EvalError::DegenerateSample(
            "all paired differences are zero".into(),
        ));
    }
    if n < MIN_N {
        return Err(EvalError::InvalidInput(format!(
            "{n} nonzero differences; the signed-rank test needs at least {MIN_N}"
        )));
    }
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&magnitudes);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);
    let (p_value, exact) = if n <= EXACT_MAX_N {
        (exact_p_value(&ranks, w_plus), true)
    } else {
        (normal_p_value(n, &ties, w_plus), false)
    };
    Ok(WilcoxonResult {
        statistic,
        w_plus,
        n,
        p_value,
        exact,
    })
}

/// Exact two-sided p-value from the permutation distribution of `W+`.
///
/// Average ranks are multiples of 1/2, so doubled ranks are integers and the
/// null distribution is a subset-sum count over them.
fn exact_p_value(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut counts = vec![0.0_f64; max_sum + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let observed = (2.0 * w_plus).round() as usize;
    let all: f64 = counts.iter().sum();
    let lower: f64 = counts[..=observed].iter().sum();
    let upper: f64 = counts[observed..].iter().sum();
    (2.0 * lower.min(upper) / all).min(1.0)
}

/// Normal approximation with continuity and tie corrections.
fn normal_p_value(n: usize, ties: &[usize], w_plus: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}
