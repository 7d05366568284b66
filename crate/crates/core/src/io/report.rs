//! Scoring runs over many cases and their JSON reports.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::canonical::to_canonical_pretty;
use super::embeddings::EmbeddingStore;
use super::manifest::{CaseManifest, SCHEMA_VERSION};
use crate::baselines::diversity;
use crate::config::{MetricConfig, MetricVariant, Satiation};
use crate::embedding::RelevanceAgg;
use crate::error::{EvalError, Result};
use crate::expectation::{expected_metric_prepared, MetricResult, PreparedCase};
use crate::grid::GridCase;

/// Name under which the Diversity baseline appears in aggregates.
pub const DIVERSITY: &str = "diversity";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub metrics: Vec<MetricConfig>,
    /// Whether to emit the Diversity baseline for grids of two or more images.
    pub diversity: bool,
}

impl ScoreConfig {
    /// The six named variants sharing one parameter set.
    pub fn standard(
        gamma: f64,
        satiation: Satiation,
        relevance_agg: RelevanceAgg,
        num_trajectories: usize,
        seed: u64,
    ) -> Self {
        let metrics = MetricVariant::ALL
            .into_iter()
            .map(|v| MetricConfig {
                gamma,
                satiation,
                relevance_agg,
                num_trajectories,
                seed,
                ..MetricConfig::for_variant(v)
            })
            .collect();
        Self {
            metrics,
            diversity: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(EvalError::Config("no metrics configured".into()));
        }
        let mut names = HashSet::new();
        for m in &self.metrics {
            m.validate()?;
            let name = m.metric_name();
            if !names.insert(name.clone()) || name == DIVERSITY {
                return Err(EvalError::Config(format!(
                    "metric name {name:?} configured twice"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub prompt_id: String,
    pub num_images: usize,
    pub metrics: BTreeMap<String, MetricResult>,
    pub diversity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub prompt_id: String,
    pub error: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub config: ScoreConfig,
    /// Sorted by prompt id.
    pub cases: Vec<CaseReport>,
    /// Mean over successful cases of each metric.
    pub aggregate: BTreeMap<String, Aggregate>,
    pub failures: Vec<CaseFailure>,
}

impl RunReport {
    pub fn render(&self) -> Result<String> {
        to_canonical_pretty(self)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| EvalError::Ingestion(format!("malformed run report: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| EvalError::Ingestion(format!("{}: {e}", path.display())))
    }

    /// 0 when every case succeeded, 4 on partial failure, otherwise the first failure's code.
    pub fn exit_code(&self) -> i32 {
        match (self.failures.first(), self.cases.is_empty()) {
            (None, _) => 0,
            (Some(_), false) => 4,
            (Some(f), true) => f.exit_code,
        }
    }

    pub fn case(&self, prompt_id: &str) -> Option<&CaseReport> {
        self.cases
            .binary_search_by(|c| c.prompt_id.as_str().cmp(prompt_id))
            .ok()
            .map(|i| &self.cases[i])
    }
}

fn score_case(case: &GridCase, config: &ScoreConfig) -> Result<CaseReport> {
    let mut prepared: Vec<(RelevanceAgg, PreparedCase)> = Vec::new();
    let mut metrics = BTreeMap::new();
    for m in &config.metrics {
        let idx = match prepared.iter().position(|(agg, _)| *agg == m.relevance_agg) {
            Some(i) => i,
            None => {
                prepared.push((m.relevance_agg, PreparedCase::new(case, m)?));
                prepared.len() - 1
            }
        };
        let result = expected_metric_prepared(case.prompt_id(), &prepared[idx].1, m)?;
        metrics.insert(result.metric_name.clone(), result);
    }
    let diversity = if config.diversity && case.len() >= 2 {
        Some(diversity(case)?)
    } else {
        None
    };
    Ok(CaseReport {
        prompt_id: case.prompt_id().to_string(),
        num_images: case.len(),
        metrics,
        diversity,
    })
}

/// Scores every manifest in parallel on the current rayon pool.
///
/// Per-case failures are collected in the report rather than aborting the run.
/// The result is independent of the number of threads.
pub fn run_score(
    manifests: &[CaseManifest],
    store: &EmbeddingStore,
    config: &ScoreConfig,
) -> Result<RunReport> {
    config.validate()?;
    if manifests.is_empty() {
        return Err(EvalError::EmptySample("no case manifests to score".into()));
    }
    let mut ids = HashSet::new();
    if let Some(dup) = manifests.iter().find(|m| !ids.insert(m.prompt_id.as_str())) {
        return Err(EvalError::InvalidInput(format!(
            "prompt id {:?} appears in two manifests",
            dup.prompt_id
        )));
    }
    let mut outcomes: Vec<std::result::Result<CaseReport, CaseFailure>> = manifests
        .par_iter()
        .map(|m| {
            m.to_case(store)
                .and_then(|c| score_case(&c, config))
                .map_err(|e| CaseFailure {
                    prompt_id: m.prompt_id.clone(),
                    error: e.to_string(),
                    exit_code: e.exit_code(),
                })
        })
        .collect();
    outcomes.sort_by(|a, b| {
        let id = |o: &std::result::Result<CaseReport, CaseFailure>| match o {
            Ok(c) => c.prompt_id.clone(),
            Err(f) => f.prompt_id.clone(),
        };
        id(a).cmp(&id(b))
    });
    let (mut cases, mut failures) = (Vec::new(), Vec::new());
    for o in outcomes {
        match o {
            Ok(c) => cases.push(c),
            Err(f) => failures.push(f),
        }
    }
    Ok(RunReport {
        schema_version: SCHEMA_VERSION.to_string(),
        config: config.clone(),
        aggregate: aggregate(&cases),
        cases,
        failures,
    })
}

fn aggregate(cases: &[CaseReport]) -> BTreeMap<String, Aggregate> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for c in cases {
        let values = c
            .metrics
            .iter()
            .map(|(name, r)| (name.as_str(), r.value))
            .chain(c.diversity.map(|d| (DIVERSITY, d)));
        for (name, v) in values {
            let e = sums.entry(name.to_string()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(name, (sum, count))| {
            (
                name,
                Aggregate {
                    mean: sum / count as f64,
                    count,
                },
            )
        })
        .collect()
}
