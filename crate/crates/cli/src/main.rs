//! `setwise`: score image grids, compute baselines and validate metrics
//! against human preferences.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical error, 4 partial failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use setwise::baselines::{
    diversity, frechet_distance, gaussian_summary, population_fid_report, DEFAULT_EPS,
};
use setwise::config::{DEFAULT_GAMMA, DEFAULT_TRAJECTORIES};
use setwise::io::{
    load_annotations, load_embeddings, load_manifests, render_markdown, run_compare, run_score,
    to_canonical_pretty, CompareOptions, EmbeddingStore, RunReport, ScoreConfig, SCHEMA_VERSION,
};
use setwise::stats::{
    category_counts, consensus_breakdown, fleiss_kappa, ConsensusScale, DEFAULT_TIE_EPS,
};
use setwise::{
    Embedding, EvalError, MetricConfig, RelevanceAgg, Satiation, TrajectoryDist, UserModel,
};

#[derive(Parser)]
#[command(
    name = "setwise",
    version,
    about = "Set-based evaluation of generated image grids"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed; each case derives its own stream from it and its prompt id.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Patience parameter in (0, 1].
    #[arg(long, global = true, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Monte-Carlo trajectories per case and metric.
    #[arg(long, global = true, default_value_t = DEFAULT_TRAJECTORIES)]
    trajectories: usize,
    /// Score one custom metric with this trajectory distribution.
    #[arg(long, global = true, value_enum)]
    trajectory_dist: Option<DistArg>,
    /// Score one custom metric with novelty-discounted relevance.
    #[arg(long, global = true)]
    novelty: bool,
    /// Score one custom metric with this user model.
    #[arg(long, global = true, value_enum)]
    user_model: Option<UserModelArg>,
    /// Aggregation of similarity over multiple targets.
    #[arg(long, global = true, value_enum, default_value = "max")]
    agg: AggArg,
    /// Satiation for the cascade model: identity, zero, linear:C or power:P.
    #[arg(long, global = true, default_value = "identity")]
    satiation: Satiation,
    /// Consensus scale for agreement: 5-level ratings or 3-level directions.
    #[arg(long, global = true, value_enum, default_value = "3")]
    consensus_scale: ScaleArg,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Saliency,
    Uniform,
    ReadingOrder,
}

#[derive(Clone, Copy, ValueEnum)]
enum UserModelArg {
    Position,
    Cascade,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggArg {
    Max,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    #[value(name = "3")]
    Three,
    #[value(name = "5")]
    Five,
}

impl From<ScaleArg> for ConsensusScale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Three => ConsensusScale::Three,
            ScaleArg::Five => ConsensusScale::Five,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score every case with the six metric variants (or one custom metric).
    Score {
        /// Manifest file, or a directory of `*.json` manifests.
        #[arg(long)]
        manifests: PathBuf,
        /// Embedding JSONL file; repeat to merge several.
        #[arg(long, required = true)]
        embeddings: Vec<PathBuf>,
        /// Reuse the configuration echoed in an earlier report; metric flags are ignored.
        #[arg(long)]
        config_from: Option<PathBuf>,
        /// Skip the Diversity baseline.
        #[arg(long)]
        no_diversity: bool,
    },
    /// Fréchet distance between two embedding sets, or of preferred and
    /// not-preferred populations against a target set.
    Fid {
        #[arg(long, requires = "b", conflicts_with_all = ["targets", "preferred", "not_preferred"])]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        #[arg(long, requires_all = ["preferred", "not_preferred"])]
        targets: Option<PathBuf>,
        #[arg(long, requires = "targets")]
        preferred: Option<PathBuf>,
        #[arg(long, requires = "targets")]
        not_preferred: Option<PathBuf>,
        /// Ridge added to each covariance diagonal.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
    },
    /// Mean pairwise cosine similarity within each grid (lower is more diverse).
    Diversity {
        #[arg(long)]
        manifests: PathBuf,
        #[arg(long, required = true)]
        embeddings: Vec<PathBuf>,
    },
    /// Agreement of each metric with unanimous human preferences.
    Compare {
        /// Report scoring system X.
        #[arg(long)]
        x: PathBuf,
        /// Report scoring system Y.
        #[arg(long)]
        y: PathBuf,
        /// CSV with header prompt_id,system_x,system_y,r1,r2,r3.
        #[arg(long)]
        annotations: PathBuf,
        /// Also write the markdown table here.
        #[arg(long)]
        markdown: Option<PathBuf>,
        /// Score differences at most this large count as ties.
        #[arg(long, default_value_t = DEFAULT_TIE_EPS)]
        tie_eps: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Inter-annotator agreement: Fleiss' kappa and consensus breakdown on both scales.
    Kappa {
        #[arg(long)]
        annotations: PathBuf,
    },
}

fn load_store(paths: &[PathBuf]) -> anyhow::Result<EmbeddingStore> {
    let mut store = EmbeddingStore::new();
    for p in paths {
        store.extend(load_embeddings(p)?)?;
    }
    Ok(store)
}

fn load_set(path: &Path) -> anyhow::Result<Vec<Embedding>> {
    Ok(load_embeddings(path)?
        .iter()
        .map(|(_, e)| e.clone())
        .collect())
}

impl Global {
    fn score_config(&self, diversity: bool) -> anyhow::Result<ScoreConfig> {
        let agg = match self.agg {
            AggArg::Max => RelevanceAgg::Max,
            AggArg::Mean => RelevanceAgg::Mean,
        };
        let custom = self.novelty || self.trajectory_dist.is_some() || self.user_model.is_some();
        if !custom {
            return Ok(ScoreConfig {
                diversity,
                ..ScoreConfig::standard(
                    self.gamma,
                    self.satiation,
                    agg,
                    self.trajectories,
                    self.seed,
                )
            });
        }
        let metric = MetricConfig {
            user_model: match self.user_model.unwrap_or(UserModelArg::Position) {
                UserModelArg::Position => UserModel::Position,
                UserModelArg::Cascade => UserModel::Cascade,
            },
            novelty: self.novelty,
            trajectory_dist: match self.trajectory_dist.unwrap_or(DistArg::Saliency) {
                DistArg::Saliency => TrajectoryDist::Saliency,
                DistArg::Uniform => TrajectoryDist::Uniform,
                DistArg::ReadingOrder => TrajectoryDist::ReadingOrder,
            },
            gamma: self.gamma,
            satiation: self.satiation,
            relevance_agg: agg,
            num_trajectories: self.trajectories,
            seed: self.seed,
        };
        Ok(ScoreConfig {
            metrics: vec![metric],
            diversity,
        })
    }

    fn emit(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

/// Runs the command and returns its exit code on success.
fn run(cli: Cli) -> anyhow::Result<u8> {
    let g = &cli.global;
    match cli.command {
        Command::Score {
            manifests,
            embeddings,
            config_from,
            no_diversity,
        } => {
            let config = match config_from {
                Some(p) => RunReport::load(&p)?.config,
                None => g.score_config(!no_diversity)?,
            };
            let report = run_score(
                &load_manifests(&manifests)?,
                &load_store(&embeddings)?,
                &config,
            )?;
            g.emit(&report.render()?)?;
            for f in &report.failures {
                eprintln!("case {}: {}", f.prompt_id, f.error);
            }
            Ok(report.exit_code() as u8)
        }
        Command::Fid {
            a,
            b,
            targets,
            preferred,
            not_preferred,
            eps,
        } => {
            let value = match (a, b, targets, preferred, not_preferred) {
                (Some(a), Some(b), None, None, None) => {
                    let sa = gaussian_summary(&load_set(&a)?, eps)?;
                    let sb = gaussian_summary(&load_set(&b)?, eps)?;
                    json!({ "schema_version": SCHEMA_VERSION, "eps": eps, "fid": frechet_distance(&sa, &sb)? })
                }
                (None, None, Some(t), Some(p), Some(n)) => {
                    let r =
                        population_fid_report(&load_set(&p)?, &load_set(&n)?, &load_set(&t)?, eps)?;
                    json!({ "schema_version": SCHEMA_VERSION, "population": r })
                }
                _ => bail!(EvalError::InvalidInput(
                    "fid needs either --a and --b, or --targets, --preferred and --not-preferred"
                        .into()
                )),
            };
            g.emit(&to_canonical_pretty(&value)?)?;
            Ok(0)
        }
        Command::Diversity {
            manifests,
            embeddings,
        } => {
            let store = load_store(&embeddings)?;
            let mut cases = Vec::new();
            let mut failures = Vec::new();
            for m in load_manifests(&manifests)? {
                match m.to_case(&store).and_then(|c| diversity(&c)) {
                    Ok(d) => cases.push(json!({ "prompt_id": m.prompt_id, "diversity": d })),
                    Err(e) => {
                        eprintln!("case {}: {e}", m.prompt_id);
                        failures.push(json!({ "prompt_id": m.prompt_id, "error": e.to_string(), "exit_code": e.exit_code() }));
                    }
                }
            }
            if cases.is_empty() && failures.is_empty() {
                bail!(EvalError::EmptySample("no case manifests".into()));
            }
            cases.sort_by(|a, b| a["prompt_id"].as_str().cmp(&b["prompt_id"].as_str()));
            let mean = cases
                .iter()
                .filter_map(|c| c["diversity"].as_f64())
                .sum::<f64>()
                / cases.len().max(1) as f64;
            let code = match (failures.is_empty(), cases.is_empty()) {
                (true, _) => 0,
                (false, false) => 4,
                (false, true) => failures[0]["exit_code"].as_i64().unwrap_or(2) as u8,
            };
            let mean = if cases.is_empty() { None } else { Some(mean) };
            g.emit(&to_canonical_pretty(&json!({
                "schema_version": SCHEMA_VERSION,
                "cases": cases,
                "mean": mean,
                "failures": failures,
            }))?)?;
            Ok(code)
        }
        Command::Compare {
            x,
            y,
            annotations,
            markdown,
            tie_eps,
            alpha,
        } => {
            let options = CompareOptions {
                scale: g.consensus_scale.into(),
                tie_eps,
                alpha,
            };
            let report = run_compare(
                &RunReport::load(&x)?,
                &RunReport::load(&y)?,
                &load_annotations(&annotations)?,
                options,
            )?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(p) = markdown {
                fs::write(&p, render_markdown(&report))
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            g.emit(&report.render()?)?;
            Ok(0)
        }
        Command::Kappa { annotations } => {
            let ratings: Vec<[u8; 3]> = load_annotations(&annotations)?
                .iter()
                .map(|a| a.ratings)
                .collect();
            let mut scales = serde_json::Map::new();
            for (name, scale) in [("3", ConsensusScale::Three), ("5", ConsensusScale::Five)] {
                let kappa = match fleiss_kappa(&category_counts(&ratings, scale)?, 3) {
                    Ok(k) => json!(k),
                    Err(e @ EvalError::UndefinedKappa(_)) => {
                        eprintln!("warning: {name}-level kappa: {e}");
                        serde_json::Value::Null
                    }
                    Err(e) => return Err(e.into()),
                };
                scales.insert(
                    name.to_string(),
                    json!({ "fleiss_kappa": kappa, "consensus": consensus_breakdown(&ratings, scale)? }),
                );
            }
            g.emit(&to_canonical_pretty(&json!({
                "schema_version": SCHEMA_VERSION,
                "items": ratings.len(),
                "scales": scales,
            }))?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads.unwrap_or(0))
        .build_global();
    if let Err(e) = pool {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<EvalError>().map_or(2, |e| e.exit_code());
            ExitCode::from(code as u8)
        }
    }
}
