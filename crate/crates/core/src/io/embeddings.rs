//! Line-delimited JSON embedding files, with optional raw f32 sidecars.
//!
//! Each non-blank line is one record. Inline form:
//!
//! ```text
//! {"dim":3,"id":"img-001","values":[...]}
//! ```
//!
//! Sidecar form, where `sidecar` is a path relative to the JSONL file and
//! `offset` is a byte offset to `dim` little-endian f32 values:
//!
//! ```text
//! {"dim":2048,"id":"img-001","offset":0,"sidecar":"features.f32"}
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::canonical::to_canonical_line;
use crate::embedding::Embedding;
use crate::error::{EvalError, Result};

/// Unknown fields (e.g. extractor metadata) are ignored.
#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sidecar: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<u64>,
}

/// Embeddings keyed by id, all of one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    entries: BTreeMap<String, Embedding>,
    /// Id of the first record, kept to name it in dimension errors.
    first: Option<String>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> Option<usize> {
        self.first.as_ref().map(|id| self.entries[id].dim())
    }

    pub fn insert(&mut self, id: String, embedding: Embedding) -> Result<()> {
        if self.entries.contains_key(&id) {
            return Err(EvalError::Ingestion(format!(
                "duplicate embedding id {id:?}"
            )));
        }
        if let (Some(dim), Some(first)) = (self.dim(), &self.first) {
            if embedding.dim() != dim {
                return Err(EvalError::Ingestion(format!(
                    "embedding {id:?} has dimension {} but {first:?} has dimension {dim}",
                    embedding.dim()
                )));
            }
        } else {
            self.first = Some(id.clone());
        }
        self.entries.insert(id, embedding);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Embedding> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Merges another store; ids must not collide and dimensions must agree.
    pub fn extend(&mut self, other: EmbeddingStore) -> Result<()> {
        for (id, e) in other.entries {
            self.insert(id, e)?;
        }
        Ok(())
    }
}

fn read_sidecar(
    base: &Path,
    record: &Record,
    cache: &mut HashMap<PathBuf, Vec<u8>>,
) -> Result<Vec<f64>> {
    let (Some(name), Some(offset)) = (&record.sidecar, record.offset) else {
        return Err(EvalError::Ingestion(format!(
            "record {:?} needs either values or sidecar+offset",
            record.id
        )));
    };
    let path = base.join(name);
    if !cache.contains_key(&path) {
        let bytes =
            fs::read(&path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        cache.insert(path.clone(), bytes);
    }
    let bytes = &cache[&path];
    let start = offset as usize;
    let end = start + 4 * record.dim;
    if end > bytes.len() {
        return Err(EvalError::Ingestion(format!(
            "record {:?} reads bytes {start}..{end} past the end of {} ({} bytes)",
            record.id,
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes[start..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Parses JSONL text; `base` resolves sidecar paths.
pub fn parse_embeddings(text: &str, base: &Path) -> Result<EmbeddingStore> {
    let mut store = EmbeddingStore::new();
    let mut cache = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: EvalError| match e {
            EvalError::Ingestion(m) | EvalError::InvalidInput(m) => {
                EvalError::Ingestion(format!("line {lineno}: {m}"))
            }
            other => other,
        };
        let record: Record = serde_json::from_str(line)
            .map_err(|e| EvalError::Ingestion(format!("line {lineno}: malformed record: {e}")))?;
        let values = match record.values.clone() {
            Some(v) => v,
            None => read_sidecar(base, &record, &mut cache).map_err(at)?,
        };
        if values.len() != record.dim {
            return Err(EvalError::Ingestion(format!(
                "line {lineno}: record {:?} declares dim {} but has {} values",
                record.id,
                record.dim,
                values.len()
            )));
        }
        let embedding = Embedding::new(values)
            .map_err(|e| at(EvalError::Ingestion(format!("record {:?}: {e}", record.id))))?;
        store.insert(record.id, embedding).map_err(at)?;
    }
    Ok(store)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let text =
        fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_embeddings(&text, base).map_err(|e| match e {
        EvalError::Ingestion(m) => EvalError::Ingestion(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Canonical JSONL text with inline values, records sorted by id.
pub fn render_embeddings(store: &EmbeddingStore) -> Result<String> {
    let mut out = String::new();
    for (id, e) in store.iter() {
        let record = Record {
            id: id.to_string(),
            dim: e.dim(),
            values: Some(e.values().to_vec()),
            sidecar: None,
            offset: None,
        };
        out.push_str(&to_canonical_line(&record)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_embeddings(path: &Path, store: &EmbeddingStore) -> Result<()> {
    fs::write(path, render_embeddings(store)?)?;
    Ok(())
}

/// Writes values as little-endian f32 to `sidecar` (next to `path`) and
/// offset records to `path`. Values are narrowed to f32.
pub fn save_embeddings_with_sidecar(
    path: &Path,
    sidecar: &str,
    store: &EmbeddingStore,
) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut bytes = Vec::new();
    let mut text = String::new();
    for (id, e) in store.iter() {
        let record = Record {
            id: id.to_string(),
            dim: e.dim(),
            values: None,
            sidecar: Some(sidecar.to_string()),
            offset: Some(bytes.len() as u64),
        };
        for &v in e.values() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        text.push_str(&to_canonical_line(&record)?);
        text.push('\n');
    }
    fs::write(base.join(sidecar), bytes)?;
    fs::write(path, text)?;
    Ok(())
}
