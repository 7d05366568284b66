//! Image embeddings and the similarity-based relevance estimate.

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

/// Dimension of the pooled Inception-style features used for interchange.
pub const DEFAULT_DIM: usize = 2048;

/// A finite, nonzero feature vector for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    norm: f64,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(EvalError::InvalidInput("embedding has dimension 0".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::InvalidInput(format!(
                "embedding entry {pos} is not finite ({})",
                values[pos]
            )));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EvalError::InvalidInput("embedding has zero norm".into()));
        }
        Ok(Self { values, norm })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// How per-target similarities are combined into one relevance value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceAgg {
    #[default]
    Max,
    Mean,
}

/// Cosine similarity in `[-1, 1]`.
///
/// Bitwise-equal vectors score exactly 1.0, so duplicated images are fully
/// redundant under the novelty discount.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(EvalError::Ingestion(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.values == b.values {
        return Ok(1.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (a.norm * b.norm)).clamp(-1.0, 1.0))
}

/// Relevance of a generated image given the exemplar targets, clamped to `[0, 1]`.
pub fn relevance(image: &Embedding, targets: &[Embedding], agg: RelevanceAgg) -> Result<f64> {
    if targets.is_empty() {
        return Err(EvalError::InvalidInput(
            "relevance needs at least one target".into(),
        ));
    }
    let sims = targets
        .iter()
        .map(|t| cosine_similarity(image, t))
        .collect::<Result<Vec<_>>>()?;
    let combined = match agg {
        RelevanceAgg::Max => sims.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        RelevanceAgg::Mean => sims.iter().sum::<f64>() / sims.len() as f64,
    };
    Ok(combined.clamp(0.0, 1.0))
}
