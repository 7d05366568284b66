//! Inspection orders and Plackett-Luce sampling over them.

use std::cmp::Ordering;

use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use crate::error::{EvalError, Result};

/// A permutation of grid positions `0..k`, in the order they are inspected.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trajectory(Vec<usize>);

impl Trajectory {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(EvalError::InvalidInput(format!(
                    "{order:?} is not a permutation"
                )));
            }
        }
        Ok(Self(order))
    }

    /// Row-major reading order `0, 1, ..., k-1`.
    pub fn identity(k: usize) -> Self {
        Self((0..k).collect())
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(EvalError::InvalidInput("no weights to sample from".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(EvalError::Ingestion(format!(
            "weight {w} is negative or not finite"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(EvalError::InvalidInput("all weights are zero".into()));
    }
    Ok(total)
}

/// Draws one Plackett-Luce permutation by Gumbel-top-k.
///
/// Each position gets `ln(w_i / sum w) + G_i` with `G_i ~ Gumbel(0, 1)` and the
/// positions are sorted by that key, descending. Zero-weight positions get a key
/// of negative infinity and trail the rest in ascending index order.
pub fn sample_trajectory<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Trajectory> {
    let total = check_weights(weights)?;
    let log_weights: Vec<f64> = weights.iter().map(|w| (w / total).ln()).collect();
    let mut keys = Vec::with_capacity(weights.len());
    let mut order = Vec::with_capacity(weights.len());
    sample_into(&log_weights, rng, &mut keys, &mut order);
    Ok(Trajectory(order))
}

/// Allocation-free core of [`sample_trajectory`]; `log_weights` must be pre-normalized.
pub(crate) fn sample_into<R: Rng + ?Sized>(
    log_weights: &[f64],
    rng: &mut R,
    keys: &mut Vec<f64>,
    order: &mut Vec<usize>,
) {
    let gumbel = Gumbel::new(0.0, 1.0).expect("standard Gumbel parameters are valid");
    keys.clear();
    // One draw per position, zero-weight positions included, so the stream
    // consumed per trajectory depends only on k.
    keys.extend(log_weights.iter().map(|&lw| {
        let g: f64 = gumbel.sample(rng);
        if lw == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            lw + g
        }
    }));
    order.clear();
    order.extend(0..log_weights.len());
    order.sort_by(|&a, &b| match keys[b].partial_cmp(&keys[a]) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(o) => o,
    });
}

/// Plackett-Luce probability of a full permutation under unnormalized weights.
///
/// Once only zero-weight positions remain, the single admissible continuation
/// is ascending index order, matching the sampler's tie policy.
pub fn plackett_luce_probability(weights: &[f64], traj: &Trajectory) -> Result<f64> {
    check_weights(weights)?;
    if traj.len() != weights.len() {
        return Err(EvalError::InvalidInput(
            "trajectory length differs from weight count".into(),
        ));
    }
    let mut used = vec![false; weights.len()];
    let mut prob = 1.0;
    for &i in traj.order() {
        let remaining: f64 = weights
            .iter()
            .zip(&used)
            .filter(|(_, &u)| !u)
            .map(|(w, _)| w)
            .sum();
        if remaining > 0.0 {
            if weights[i] == 0.0 {
                return Ok(0.0);
            }
            prob *= weights[i] / remaining;
        } else if used.iter().position(|&u| !u) != Some(i) {
            return Ok(0.0);
        }
        used[i] = true;
    }
    Ok(prob)
}
