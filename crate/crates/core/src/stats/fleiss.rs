use crate::error::{EvalError, Result};

use super::consensus::ConsensusScale;

/// Fleiss' kappa over an items x categories count matrix.
pub fn fleiss_kappa(counts: &[Vec<usize>], raters_per_item: usize) -> Result<f64> {
    if counts.is_empty() {
        return Err(EvalError::EmptySample("no rated items".into()));
    }
    if raters_per_item < 2 {
        return Err(EvalError::InvalidInput(
            "kappa needs at least 2 raters per item".into(),
        ));
    }
    let categories = counts[0].len();
    let n = raters_per_item as f64;
    let mut category_totals = vec![0usize; categories];
    let mut agreement_sum = 0.0;
    for (i, row) in counts.iter().enumerate() {
        if row.len() != categories {
            return Err(EvalError::InvalidInput(format!(
                "item {i} has {} categories, expected {categories}",
                row.len()
            )));
        }
        let total: usize = row.iter().sum();
        if total != raters_per_item {
            return Err(EvalError::InvalidInput(format!(
                "item {i} has {total} ratings, expected {raters_per_item}"
            )));
        }
        let sq: usize = row.iter().map(|c| c * c).sum();
        agreement_sum += (sq as f64 - n) / (n * (n - 1.0));
        for (t, c) in category_totals.iter_mut().zip(row) {
            *t += c;
        }
    }
    let items = counts.len() as f64;
    let observed = agreement_sum / items;
    let chance: f64 = category_totals
        .iter()
        .map(|&t| {
            let p = t as f64 / (items * n);
            p * p
        })
        .sum();
    if 1.0 - chance <= f64::EPSILON {
        return Err(EvalError::UndefinedKappa(
            "every rating falls in one category, so chance agreement is 1".into(),
        ));
    }
    Ok((observed - chance) / (1.0 - chance))
}

/// Count matrix for three-annotator Likert ratings on the given scale.
pub fn category_counts(ratings: &[[u8; 3]], scale: ConsensusScale) -> Result<Vec<Vec<usize>>> {
    ratings
        .iter()
        .map(|item| {
            let mut row = vec![0; scale.categories()];
            for &r in item {
                row[scale.category(r)?] += 1;
            }
            Ok(row)
        })
        .collect()
}
