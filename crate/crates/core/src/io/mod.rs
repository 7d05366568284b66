//! File formats and the batch drivers behind the CLI.

mod annotations;
mod canonical;
mod compare;
mod embeddings;
mod manifest;
mod report;

pub use annotations::{load_annotations, read_annotations, AnnotationRecord};
pub use canonical::{format_f64, to_canonical_line, to_canonical_pretty};
pub use compare::{
    render_markdown, run_compare, CompareOptions, CompareReport, MetricComparison, PreferencePair,
};
pub use embeddings::{
    load_embeddings, parse_embeddings, render_embeddings, save_embeddings,
    save_embeddings_with_sidecar, EmbeddingStore,
};
pub use manifest::{
    load_manifests, parse_manifests, CaseManifest, GridShape, ImageEntry, TargetEntry,
    SCHEMA_VERSION,
};
pub use report::{
    run_score, Aggregate, CaseFailure, CaseReport, RunReport, ScoreConfig, DIVERSITY,
};
