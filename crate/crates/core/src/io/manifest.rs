//! Per-prompt case manifests that reference embeddings by id.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::embeddings::EmbeddingStore;
use crate::error::{EvalError, Result};
use crate::grid::{GridCase, GridImage};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub embedding_ref: String,
    pub saliency: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub embedding_ref: String,
}

/// One prompt's grid, with images listed row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseManifest {
    pub schema_version: String,
    pub prompt_id: String,
    pub grid: GridShape,
    pub images: Vec<ImageEntry>,
    pub targets: Vec<TargetEntry>,
}

impl CaseManifest {
    /// Resolves embedding refs and validates the grid.
    pub fn to_case(&self, store: &EmbeddingStore) -> Result<GridCase> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(EvalError::Ingestion(format!(
                "{}: unsupported schema_version {:?}",
                self.prompt_id, self.schema_version
            )));
        }
        let lookup = |r: &str| {
            store.get(r).cloned().ok_or_else(|| {
                EvalError::Ingestion(format!(
                    "{}: unresolved embedding_ref {r:?}",
                    self.prompt_id
                ))
            })
        };
        let images = self
            .images
            .iter()
            .map(|e| {
                Ok(GridImage {
                    image_id: e.image_id.clone(),
                    embedding: lookup(&e.embedding_ref)?,
                    saliency: e.saliency,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let targets = self
            .targets
            .iter()
            .map(|t| lookup(&t.embedding_ref))
            .collect::<Result<Vec<_>>>()?;
        GridCase::new(
            self.prompt_id.clone(),
            self.grid.width,
            self.grid.height,
            images,
            targets,
        )
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestFile {
    One(CaseManifest),
    Many(Vec<CaseManifest>),
}

/// Parses a manifest document holding one case or an array of cases.
pub fn parse_manifests(text: &str) -> Result<Vec<CaseManifest>> {
    match serde_json::from_str::<ManifestFile>(text) {
        Ok(ManifestFile::One(m)) => Ok(vec![m]),
        Ok(ManifestFile::Many(ms)) => Ok(ms),
        Err(e) => Err(EvalError::Ingestion(format!("malformed manifest: {e}"))),
    }
}

/// Loads a manifest file, or every `*.json` file of a directory in name order.
pub fn load_manifests(path: &Path) -> Result<Vec<CaseManifest>> {
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(load_manifests(&f)?);
        }
        return Ok(out);
    }
    let text =
        fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_manifests(&text).map_err(|e| EvalError::Ingestion(format!("{}: {e}", path.display())))
}
