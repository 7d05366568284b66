//! Per-trajectory metric kernels: position (RBP), cascade (ERR) and the novelty discount.

use crate::config::validate_gamma;
use crate::embedding::{cosine_similarity, Embedding};
use crate::error::{EvalError, Result};
use crate::trajectory::Trajectory;

/// `sum_i gain_i * gamma^(i-1)` over gains already in inspection order.
#[inline]
pub(crate) fn position_sum(gains: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut reach = 1.0;
    for &g in gains {
        total += g * reach;
        reach *= gamma;
    }
    total
}

/// Cascade analogue of [`position_sum`]; `satiation[i]` is the stop probability after position `i`.
///
/// Evaluated as `(gain * reach) * survive` so that an all-zero satiation
/// reproduces [`position_sum`] bit for bit.
#[inline]
pub(crate) fn cascade_sum(gains: &[f64], satiation: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut reach = 1.0;
    let mut survive = 1.0;
    for (&g, &s) in gains.iter().zip(satiation) {
        total += g * reach * survive;
        reach *= gamma;
        survive *= 1.0 - s;
    }
    total
}

fn check_unit_interval(values: &[f64], what: &str) -> Result<()> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(EvalError::Config(format!(
            "{what} value {v} outside [0, 1]"
        ))),
        None => Ok(()),
    }
}

fn check_lengths(traj: &Trajectory, n: usize) -> Result<()> {
    if traj.len() != n {
        return Err(EvalError::InvalidInput(format!(
            "trajectory of length {} for {n} images",
            traj.len()
        )));
    }
    Ok(())
}

/// Rank-biased precision of one trajectory; `rel` is indexed by grid position.
pub fn rbp(traj: &Trajectory, rel: &[f64], gamma: f64) -> Result<f64> {
    validate_gamma(gamma)?;
    check_lengths(traj, rel.len())?;
    check_unit_interval(rel, "relevance")?;
    let gains: Vec<f64> = traj.order().iter().map(|&i| rel[i]).collect();
    Ok(position_sum(&gains, gamma))
}

/// Cascade metric of one trajectory; `rel` and `satiation` are indexed by grid position.
pub fn err(traj: &Trajectory, rel: &[f64], satiation: &[f64], gamma: f64) -> Result<f64> {
    validate_gamma(gamma)?;
    check_lengths(traj, rel.len())?;
    check_lengths(traj, satiation.len())?;
    check_unit_interval(rel, "relevance")?;
    check_unit_interval(satiation, "satiation")?;
    let gains: Vec<f64> = traj.order().iter().map(|&i| rel[i]).collect();
    let sats: Vec<f64> = traj.order().iter().map(|&i| satiation[i]).collect();
    Ok(cascade_sum(&gains, &sats, gamma))
}

/// Novelty of the image at 1-based position `i` of `traj` relative to the ones before it.
pub fn novelty_discount(i: usize, traj: &Trajectory, embeddings: &[Embedding]) -> Result<f64> {
    check_lengths(traj, embeddings.len())?;
    if i == 0 || i > traj.len() {
        return Err(EvalError::InvalidInput(format!(
            "position {i} outside 1..={}",
            traj.len()
        )));
    }
    let order = traj.order();
    let current = &embeddings[order[i - 1]];
    let mut max_sim = 0.0_f64;
    for &j in &order[..i - 1] {
        max_sim = max_sim.max(cosine_similarity(current, &embeddings[j])?);
    }
    Ok((1.0 - max_sim).clamp(0.0, 1.0))
}

/// Novelty discounts for every position of `order`, from a precomputed `k x k`
/// row-major cosine matrix.
#[inline]
pub(crate) fn novelty_from_similarity(order: &[usize], sim: &[f64], k: usize, out: &mut Vec<f64>) {
    out.clear();
    for (pos, &cur) in order.iter().enumerate() {
        let row = &sim[cur * k..(cur + 1) * k];
        let max_sim = order[..pos].iter().map(|&j| row[j]).fold(0.0_f64, f64::max);
        out.push((1.0 - max_sim).clamp(0.0, 1.0));
    }
}
