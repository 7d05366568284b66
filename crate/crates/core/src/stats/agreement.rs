use serde::{Deserialize, Serialize};

use super::consensus::{ConsensusLabel, Direction};
use crate::error::{EvalError, Result};

pub const DEFAULT_TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub rate: f64,
    pub n_used: usize,
    pub n_agree: usize,
    /// Prompts whose scores differed by at most the tie tolerance.
    pub n_ties: usize,
}

fn check_aligned(scores_x: &[f64], scores_y: &[f64], labels: &[ConsensusLabel]) -> Result<()> {
    if scores_x.len() != scores_y.len() || scores_x.len() != labels.len() {
        return Err(EvalError::InvalidInput(format!(
            "misaligned inputs: {} x scores, {} y scores, {} labels",
            scores_x.len(),
            scores_y.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Indices of unanimous, strict-preference prompts with their preferred side.
fn strict_unanimous(labels: &[ConsensusLabel]) -> impl Iterator<Item = (usize, Direction)> + '_ {
    labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| match (l.is_unanimous(), l.direction()) {
            (true, Some(d)) if d != Direction::Same => Some((i, d)),
            _ => None,
        })
}

/// Fraction of unanimous strict-preference prompts where the metric orders the
/// systems the same way the annotators did. Differences within `tie_eps` count
/// as disagreement.
pub fn agreement_rate(
    scores_x: &[f64],
    scores_y: &[f64],
    labels: &[ConsensusLabel],
    tie_eps: f64,
) -> Result<Agreement> {
    check_aligned(scores_x, scores_y, labels)?;
    let (mut used, mut agree, mut ties) = (0, 0, 0);
    for (i, dir) in strict_unanimous(labels) {
        used += 1;
        let diff = scores_x[i] - scores_y[i];
        if diff.abs() <= tie_eps {
            ties += 1;
            continue;
        }
        let metric_dir = if diff > 0.0 {
            Direction::XBetter
        } else {
            Direction::YBetter
        };
        if metric_dir == dir {
            agree += 1;
        }
    }
    if used == 0 {
        return Err(EvalError::EmptySample(
            "no prompt has a unanimous strict preference".into(),
        ));
    }
    Ok(Agreement {
        rate: agree as f64 / used as f64,
        n_used: used,
        n_agree: agree,
        n_ties: ties,
    })
}

/// `(preferred score, not-preferred score)` for the same prompts `agreement_rate` uses.
pub fn preference_pairs(
    scores_x: &[f64],
    scores_y: &[f64],
    labels: &[ConsensusLabel],
) -> Result<Vec<(f64, f64)>> {
    check_aligned(scores_x, scores_y, labels)?;
    Ok(strict_unanimous(labels)
        .map(|(i, d)| match d {
            Direction::XBetter => (scores_x[i], scores_y[i]),
            _ => (scores_y[i], scores_x[i]),
        })
        .collect())
}
