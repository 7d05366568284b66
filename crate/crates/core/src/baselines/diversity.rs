use crate::embedding::{cosine_similarity, Embedding};
use crate::error::{EvalError, Result};
use crate::grid::GridCase;

/// Mean pairwise cosine similarity of a grid.
///
/// Higher values mean a *less* diverse grid, so callers ranking systems by
/// this baseline should prefer lower scores.
pub fn diversity(case: &GridCase) -> Result<f64> {
    mean_pairwise_similarity(&case.embeddings())
}

pub fn mean_pairwise_similarity(embeddings: &[&Embedding]) -> Result<f64> {
    let k = embeddings.len();
    if k < 2 {
        return Err(EvalError::InvalidInput(format!(
            "diversity needs at least 2 images, got {k}"
        )));
    }
    let mut total = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            total += cosine_similarity(embeddings[i], embeddings[j])?;
        }
    }
    Ok(total / (k * (k - 1) / 2) as f64)
}
