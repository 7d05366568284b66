//! The per-prompt evaluation unit: a grid of generated images plus exemplars.

use std::collections::HashSet;

use crate::embedding::Embedding;
use crate::error::{EvalError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    pub image_id: String,
    pub embedding: Embedding,
    pub saliency: f64,
}

/// One prompt's generated images (row-major) and its target exemplars.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    prompt_id: String,
    width: usize,
    height: usize,
    images: Vec<GridImage>,
    targets: Vec<Embedding>,
}

impl GridCase {
    pub fn new(
        prompt_id: impl Into<String>,
        width: usize,
        height: usize,
        images: Vec<GridImage>,
        targets: Vec<Embedding>,
    ) -> Result<Self> {
        let prompt_id = prompt_id.into();
        if width == 0 || height == 0 {
            return Err(EvalError::InvalidInput(format!(
                "{prompt_id}: grid shape {width}x{height} must be positive"
            )));
        }
        if images.len() != width * height {
            return Err(EvalError::InvalidInput(format!(
                "{prompt_id}: grid {width}x{height} needs {} images, got {}",
                width * height,
                images.len()
            )));
        }
        if targets.is_empty() {
            return Err(EvalError::InvalidInput(format!(
                "{prompt_id}: no target exemplars"
            )));
        }
        let mut seen = HashSet::new();
        for img in &images {
            if !seen.insert(img.image_id.as_str()) {
                return Err(EvalError::InvalidInput(format!(
                    "{prompt_id}: duplicate image id {}",
                    img.image_id
                )));
            }
            if !(img.saliency.is_finite() && img.saliency >= 0.0) {
                return Err(EvalError::Ingestion(format!(
                    "{prompt_id}: image {} has invalid saliency {}",
                    img.image_id, img.saliency
                )));
            }
        }
        let dim = images[0].embedding.dim();
        let mismatch = images
            .iter()
            .map(|i| (i.image_id.as_str(), i.embedding.dim()))
            .chain(targets.iter().map(|t| ("<target>", t.dim())))
            .find(|&(_, d)| d != dim);
        if let Some((id, d)) = mismatch {
            return Err(EvalError::Ingestion(format!(
                "{prompt_id}: embedding {id} has dimension {d}, expected {dim}"
            )));
        }
        Ok(Self {
            prompt_id,
            width,
            height,
            images,
            targets,
        })
    }

    /// Single-row grid, the shape of a ranked list.
    pub fn row(
        prompt_id: impl Into<String>,
        images: Vec<GridImage>,
        targets: Vec<Embedding>,
    ) -> Result<Self> {
        let k = images.len();
        Self::new(prompt_id, k, 1, images, targets)
    }

    pub fn prompt_id(&self) -> &str {
        &self.prompt_id
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of images `k = width * height`.
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[GridImage] {
        &self.images
    }

    pub fn targets(&self) -> &[Embedding] {
        &self.targets
    }

    pub fn saliencies(&self) -> Vec<f64> {
        self.images.iter().map(|i| i.saliency).collect()
    }

    pub fn embeddings(&self) -> Vec<&Embedding> {
        self.images.iter().map(|i| &i.embedding).collect()
    }
}
