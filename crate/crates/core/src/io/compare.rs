//! Metric-versus-human agreement between two scored systems.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::annotations::AnnotationRecord;
use super::canonical::to_canonical_pretty;
use super::manifest::SCHEMA_VERSION;
use super::report::{RunReport, DIVERSITY};
use crate::config::MetricVariant;
use crate::error::{EvalError, Result};
use crate::stats::{
    agreement_rate, consensus_breakdown, preference_pairs, wilcoxon_from_differences, Agreement,
    ConsensusBreakdown, ConsensusLabel, ConsensusScale, Direction, WilcoxonResult, DEFAULT_TIE_EPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub scale: ConsensusScale,
    pub tie_eps: f64,
    /// Significance level for the Wilcoxon test.
    pub alpha: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            scale: ConsensusScale::Three,
            tie_eps: DEFAULT_TIE_EPS,
            alpha: 0.05,
        }
    }
}

/// Scores of one consensus prompt, preferred system first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt_id: String,
    pub preferred: f64,
    pub not_preferred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    /// Scores are negated before comparison when lower is better.
    pub lower_is_better: bool,
    pub agreement: Option<Agreement>,
    pub wilcoxon: Option<WilcoxonResult>,
    /// Wilcoxon p below alpha with the preferred system scoring higher.
    pub significant: bool,
    pub pairs: Vec<PreferencePair>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub schema_version: String,
    pub options: CompareOptions,
    pub num_prompts: usize,
    pub consensus: ConsensusBreakdown,
    pub metrics: Vec<MetricComparison>,
    pub warnings: Vec<String>,
}

impl CompareReport {
    pub fn render(&self) -> Result<String> {
        to_canonical_pretty(self)
    }
}

fn check_prompt_sets(
    x: &RunReport,
    y: &RunReport,
    annotations: &[AnnotationRecord],
) -> Result<BTreeSet<String>> {
    let xs: BTreeSet<String> = x.cases.iter().map(|c| c.prompt_id.clone()).collect();
    let ys: BTreeSet<String> = y.cases.iter().map(|c| c.prompt_id.clone()).collect();
    let ann: BTreeSet<String> = annotations.iter().map(|a| a.prompt_id.clone()).collect();
    if xs == ys && ys == ann {
        return Ok(xs);
    }
    let all: BTreeSet<&String> = xs.iter().chain(&ys).chain(&ann).collect();
    let mut msg = String::from("prompt sets differ:");
    for (name, set) in [("report x", &xs), ("report y", &ys), ("annotations", &ann)] {
        let missing: Vec<&str> = all
            .iter()
            .filter(|p| !set.contains(**p))
            .map(|p| p.as_str())
            .collect();
        if !missing.is_empty() {
            let _ = write!(msg, " {name} lacks [{}];", missing.join(", "));
        }
    }
    Err(EvalError::InvalidInput(
        msg.trim_end_matches(';').to_string(),
    ))
}

/// Metric names present in every case of both reports, named variants first.
fn shared_metrics(x: &RunReport, y: &RunReport) -> Vec<String> {
    let names_in = |r: &RunReport| -> BTreeSet<String> {
        let mut it = r.cases.iter().map(|c| {
            let mut s: BTreeSet<String> = c.metrics.keys().cloned().collect();
            if c.diversity.is_some() {
                s.insert(DIVERSITY.to_string());
            }
            s
        });
        let first = it.next().unwrap_or_default();
        it.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
    };
    let shared: BTreeSet<String> = names_in(x).intersection(&names_in(y)).cloned().collect();
    let rank = |n: &String| {
        MetricVariant::ALL
            .iter()
            .position(|v| v.name() == n)
            .unwrap_or(if n == DIVERSITY {
                usize::MAX
            } else {
                MetricVariant::ALL.len()
            })
    };
    let mut names: Vec<String> = shared.into_iter().collect();
    names.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)));
    names
}

fn score_of(r: &RunReport, prompt: &str, metric: &str) -> f64 {
    let case = r.case(prompt).expect("prompt sets checked");
    if metric == DIVERSITY {
        case.diversity.expect("shared metrics checked")
    } else {
        case.metrics[metric].value
    }
}

/// Agreement, Wilcoxon test and raw pairs for every metric the two reports share.
///
/// `x` scores the annotations' system X and `y` their system Y. The Wilcoxon
/// test pairs preferred against not-preferred scores over the unanimous
/// strict-preference prompts.
pub fn run_compare(
    x: &RunReport,
    y: &RunReport,
    annotations: &[AnnotationRecord],
    options: CompareOptions,
) -> Result<CompareReport> {
    let prompts: Vec<String> = check_prompt_sets(x, y, annotations)?.into_iter().collect();
    let mut by_prompt: Vec<&AnnotationRecord> = annotations.iter().collect();
    by_prompt.sort_by(|a, b| a.prompt_id.cmp(&b.prompt_id));
    let labels: Vec<ConsensusLabel> = by_prompt
        .iter()
        .map(|a| a.consensus(options.scale))
        .collect::<Result<_>>()?;
    let ratings: Vec<[u8; 3]> = by_prompt.iter().map(|a| a.ratings).collect();
    let breakdown = consensus_breakdown(&ratings, options.scale)?;

    let metric_names = shared_metrics(x, y);
    if metric_names.is_empty() {
        return Err(EvalError::InvalidInput(
            "the two reports share no metric".into(),
        ));
    }
    let mut warnings = Vec::new();
    let mut metrics = Vec::new();
    for name in metric_names {
        let lower_is_better = name == DIVERSITY;
        let orient = |v: f64| if lower_is_better { -v } else { v };
        let raw_x: Vec<f64> = prompts.iter().map(|p| score_of(x, p, &name)).collect();
        let raw_y: Vec<f64> = prompts.iter().map(|p| score_of(y, p, &name)).collect();
        let sx: Vec<f64> = raw_x.iter().map(|&v| orient(v)).collect();
        let sy: Vec<f64> = raw_y.iter().map(|&v| orient(v)).collect();
        let mut errors = Vec::new();

        let agreement = match agreement_rate(&sx, &sy, &labels, options.tie_eps) {
            Ok(a) => {
                if a.n_ties == a.n_used {
                    warnings.push(format!(
                        "{name}: all {} compared prompts are ties",
                        a.n_used
                    ));
                }
                Some(a)
            }
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        };

        let raw_pairs = preference_pairs(&raw_x, &raw_y, &labels)?;
        let ids = prompts.iter().zip(&labels).filter(|(_, l)| {
            l.is_unanimous() && l.direction().is_some_and(|d| d != Direction::Same)
        });
        let pairs: Vec<PreferencePair> = ids
            .zip(&raw_pairs)
            .map(|((p, _), &(preferred, not_preferred))| PreferencePair {
                prompt_id: p.clone(),
                preferred,
                not_preferred,
            })
            .collect();
        let diffs: Vec<f64> = pairs
            .iter()
            .map(|p| orient(p.preferred) - orient(p.not_preferred))
            .collect();
        let wilcoxon = match wilcoxon_from_differences(&diffs) {
            Ok(w) => Some(w),
            Err(e) => {
                warnings.push(format!("{name}: Wilcoxon test unavailable: {e}"));
                errors.push(e.to_string());
                None
            }
        };
        let significant = wilcoxon.is_some_and(|w| {
            let half = (w.n * (w.n + 1)) as f64 / 4.0;
            w.p_value < options.alpha && w.w_plus > half
        });
        metrics.push(MetricComparison {
            metric: name,
            lower_is_better,
            agreement,
            wilcoxon,
            significant,
            pairs,
            errors,
        });
    }
    Ok(CompareReport {
        schema_version: SCHEMA_VERSION.to_string(),
        options,
        num_prompts: prompts.len(),
        consensus: breakdown,
        metrics,
        warnings,
    })
}

/// Markdown table: one row per metric, `*` marks significant agreement.
pub fn render_markdown(report: &CompareReport) -> String {
    let scale = match report.options.scale {
        ConsensusScale::Five => "5-level",
        ConsensusScale::Three => "3-level",
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Agreement with unanimous {scale} human preferences ({} prompts)\n",
        report.num_prompts
    );
    let _ = writeln!(out, "| Metric | Agreement | n | Wilcoxon p |");
    let _ = writeln!(out, "|---|---:|---:|---:|");
    for m in &report.metrics {
        let (rate, n) = match &m.agreement {
            Some(a) => (
                format!(
                    "{:.1}%{}",
                    100.0 * a.rate,
                    if m.significant { "*" } else { "" }
                ),
                a.n_used.to_string(),
            ),
            None => ("-".to_string(), "0".to_string()),
        };
        let p = m
            .wilcoxon
            .map_or("-".to_string(), |w| format!("{:.4}", w.p_value));
        let _ = writeln!(out, "| {} | {rate} | {n} | {p} |", m.metric);
    }
    let _ = writeln!(
        out,
        "\n`*` Wilcoxon paired test, p < {}.",
        report.options.alpha
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expectation::MetricResult;
    use crate::io::report::{CaseReport, ScoreConfig};
    use std::collections::BTreeMap;

    fn report(scores: &[(&str, f64, f64)]) -> RunReport {
        let cases = scores
            .iter()
            .map(|&(id, rbp, div)| {
                let result = MetricResult {
                    prompt_id: id.into(),
                    metric_name: "rbp".into(),
                    value: rbp,
                    num_trajectories_used: 1,
                    seed: 0,
                    std_error: 0.0,
                };
                CaseReport {
                    prompt_id: id.into(),
                    num_images: 4,
                    metrics: BTreeMap::from([("rbp".to_string(), result)]),
                    diversity: Some(div),
                }
            })
            .collect();
        RunReport {
            schema_version: "1".into(),
            config: ScoreConfig {
                metrics: vec![],
                diversity: true,
            },
            cases,
            aggregate: BTreeMap::new(),
            failures: vec![],
        }
    }

    fn ann(id: &str, r: [u8; 3]) -> AnnotationRecord {
        AnnotationRecord {
            prompt_id: id.into(),
            system_x: "X".into(),
            system_y: "Y".into(),
            ratings: r,
        }
    }

    #[test]
    fn agreement_pairs_and_significance() {
        // Six unanimous X-better prompts, X scores higher on rbp and lower on diversity.
        let ids = ["p1", "p2", "p3", "p4", "p5", "p6"];
        let xs: Vec<_> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (*id, 0.5 + 0.01 * i as f64, 0.1))
            .collect();
        let ys: Vec<_> = ids.iter().map(|id| (*id, 0.4, 0.3)).collect();
        let mut anns: Vec<_> = ids.iter().map(|id| ann(id, [1, 2, 1])).collect();
        anns.push(ann("p7", [1, 3, 5]));
        let mut xs = xs;
        let mut ys = ys;
        xs.push(("p7", 0.0, 0.0));
        ys.push(("p7", 1.0, 1.0));
        let out =
            run_compare(&report(&xs), &report(&ys), &anns, CompareOptions::default()).unwrap();
        assert_eq!(
            out.metrics
                .iter()
                .map(|m| m.metric.as_str())
                .collect::<Vec<_>>(),
            ["rbp", "diversity"]
        );
        for m in &out.metrics {
            let a = m.agreement.unwrap();
            assert_eq!((a.n_used, a.n_agree), (6, 6));
            assert_eq!(m.pairs.len(), 6);
            // All six differences positive: exact two-sided p = 2/64.
            let w = m.wilcoxon.unwrap();
            assert!((w.p_value - 0.03125).abs() < 1e-12, "{}", w.p_value);
            assert!(m.significant);
        }
        assert_eq!(out.metrics[1].pairs[0].preferred, 0.1);
        let md = render_markdown(&out);
        assert!(md.contains("| rbp | 100.0%* | 6 | 0.0312 |"), "{md}");
    }

    #[test]
    fn mismatched_prompts_are_listed() {
        let x = report(&[("a", 0.1, 0.1), ("b", 0.2, 0.2)]);
        let y = report(&[("a", 0.1, 0.1)]);
        let err = run_compare(
            &x,
            &y,
            &[ann("a", [1, 1, 1]), ann("c", [1, 1, 1])],
            CompareOptions::default(),
        )
        .unwrap_err()
        .to_string();
        assert!(
            err.contains("report y lacks [b, c]") && err.contains("annotations lacks [b]"),
            "{err}"
        );
    }

    #[test]
    fn ties_and_small_samples_warn() {
        let x = report(&[("a", 0.5, 0.5), ("b", 0.5, 0.5)]);
        let out = run_compare(
            &x,
            &x,
            &[ann("a", [1, 1, 1]), ann("b", [5, 5, 4])],
            CompareOptions::default(),
        )
        .unwrap();
        let m = &out.metrics[0];
        assert_eq!(m.agreement.unwrap().n_ties, 2);
        assert!(m.wilcoxon.is_none() && !m.significant);
        assert!(out.warnings.iter().any(|w| w.contains("ties")));
        assert!(out.warnings.iter().any(|w| w.contains("Wilcoxon")));
    }
}
