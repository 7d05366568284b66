//! Expected metric values over the trajectory distribution, sampled or enumerated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{MetricConfig, TrajectoryDist, UserModel};
use crate::embedding::{cosine_similarity, relevance};
use crate::error::{EvalError, Result};
use crate::grid::GridCase;
use crate::kernels::{cascade_sum, novelty_from_similarity, position_sum};
use crate::trajectory::{sample_into, Trajectory};

/// Largest grid for which all `k!` trajectories are enumerated.
pub const MAX_EXACT_K: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub prompt_id: String,
    pub metric_name: String,
    pub value: f64,
    pub num_trajectories_used: usize,
    pub seed: u64,
    /// Monte-Carlo standard error of `value`; zero for deterministic results.
    pub std_error: f64,
}

/// Per-case quantities shared by every trajectory: relevance and pairwise similarity.
#[derive(Debug, Clone)]
pub struct PreparedCase {
    relevance: Vec<f64>,
    similarity: Vec<f64>,
    saliency: Vec<f64>,
}

/// Reusable buffers for trajectory evaluation.
#[derive(Debug, Default)]
struct Scratch {
    keys: Vec<f64>,
    order: Vec<usize>,
    novelty: Vec<f64>,
    gains: Vec<f64>,
    sats: Vec<f64>,
}

impl PreparedCase {
    pub fn new(case: &GridCase, config: &MetricConfig) -> Result<Self> {
        let images = case.images();
        let k = images.len();
        let relevance = images
            .iter()
            .map(|img| relevance(&img.embedding, case.targets(), config.relevance_agg))
            .collect::<Result<Vec<_>>>()?;
        let mut similarity = vec![0.0; k * k];
        for i in 0..k {
            similarity[i * k + i] = 1.0;
            for j in i + 1..k {
                let s = cosine_similarity(&images[i].embedding, &images[j].embedding)?;
                similarity[i * k + j] = s;
                similarity[j * k + i] = s;
            }
        }
        Ok(Self {
            relevance,
            similarity,
            saliency: case.saliencies(),
        })
    }

    pub fn len(&self) -> usize {
        self.relevance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevance.is_empty()
    }

    /// Relevance of each grid position.
    pub fn relevance(&self) -> &[f64] {
        &self.relevance
    }

    /// Metric value of a single trajectory under `config`.
    pub fn trajectory_value(&self, traj: &Trajectory, config: &MetricConfig) -> Result<f64> {
        if traj.len() != self.len() {
            return Err(EvalError::InvalidInput(
                "trajectory length differs from grid size".into(),
            ));
        }
        Ok(self.value_of(traj.order(), config, &mut Scratch::default()))
    }

    fn value_of(&self, order: &[usize], config: &MetricConfig, s: &mut Scratch) -> f64 {
        s.gains.clear();
        if config.novelty {
            novelty_from_similarity(order, &self.similarity, self.len(), &mut s.novelty);
            s.gains.extend(
                order
                    .iter()
                    .zip(&s.novelty)
                    .map(|(&i, &nov)| self.relevance[i] * nov),
            );
        } else {
            s.gains.extend(order.iter().map(|&i| self.relevance[i]));
        }
        match config.user_model {
            UserModel::Position => position_sum(&s.gains, config.gamma),
            UserModel::Cascade => {
                s.sats.clear();
                s.sats
                    .extend(s.gains.iter().map(|&g| config.satiation.apply(g)));
                cascade_sum(&s.gains, &s.sats, config.gamma)
            }
        }
    }

    /// Plackett-Luce weights implied by the trajectory distribution; `None` for reading order.
    fn weights(&self, dist: TrajectoryDist) -> Result<Option<Vec<f64>>> {
        match dist {
            TrajectoryDist::ReadingOrder => Ok(None),
            TrajectoryDist::Uniform => Ok(Some(vec![1.0; self.len()])),
            TrajectoryDist::Saliency => {
                if self.saliency.iter().all(|&s| s <= 0.0) {
                    return Err(EvalError::InvalidInput(
                        "saliency-weighted trajectories need at least one positive saliency".into(),
                    ));
                }
                Ok(Some(self.saliency.clone()))
            }
        }
    }
}

/// RNG stream for one case: `seed` xor the first 8 bytes of SHA-256(prompt_id).
pub fn case_rng(seed: u64, prompt_id: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(prompt_id.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(seed ^ u64::from_le_bytes(head))
}

/// Running mean/variance; the mean of a constant stream is that constant exactly.
#[derive(Debug, Default, Clone, Copy)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Monte-Carlo estimate of the metric over `config.num_trajectories` sampled trajectories.
pub fn expected_metric(case: &GridCase, config: &MetricConfig) -> Result<MetricResult> {
    config.validate()?;
    let prepared = PreparedCase::new(case, config)?;
    expected_metric_prepared(case.prompt_id(), &prepared, config)
}

/// [`expected_metric`] on a case whose relevance and similarities are already computed.
pub fn expected_metric_prepared(
    prompt_id: &str,
    prepared: &PreparedCase,
    config: &MetricConfig,
) -> Result<MetricResult> {
    config.validate()?;
    let mut scratch = Scratch::default();
    let (value, used, std_error) = match prepared.weights(config.trajectory_dist)? {
        None => {
            let order: Vec<usize> = (0..prepared.len()).collect();
            (prepared.value_of(&order, config, &mut scratch), 1, 0.0)
        }
        Some(weights) => {
            let total: f64 = weights.iter().sum();
            let log_weights: Vec<f64> = weights.iter().map(|w| (w / total).ln()).collect();
            let mut rng = case_rng(config.seed, prompt_id);
            let mut stats = Welford::default();
            let mut keys = std::mem::take(&mut scratch.keys);
            let mut order = std::mem::take(&mut scratch.order);
            for _ in 0..config.num_trajectories {
                sample_into(&log_weights, &mut rng, &mut keys, &mut order);
                stats.push(prepared.value_of(&order, config, &mut scratch));
            }
            (stats.mean, stats.n, stats.std_error())
        }
    };
    if !value.is_finite() {
        return Err(EvalError::Numerical(format!(
            "{prompt_id}: metric value {value} is not finite"
        )));
    }
    Ok(MetricResult {
        prompt_id: prompt_id.to_string(),
        metric_name: config.metric_name(),
        value,
        num_trajectories_used: used,
        seed: config.seed,
        std_error,
    })
}

/// Exact expectation by enumerating every trajectory with its Plackett-Luce probability.
pub fn exact_expected_metric(case: &GridCase, config: &MetricConfig) -> Result<MetricResult> {
    config.validate()?;
    let k = case.len();
    if k > MAX_EXACT_K {
        return Err(EvalError::Capability(format!(
            "exact enumeration supports k <= {MAX_EXACT_K}, got {k}"
        )));
    }
    let prepared = PreparedCase::new(case, config)?;
    let mut scratch = Scratch::default();
    let (value, used) = match prepared.weights(config.trajectory_dist)? {
        None => {
            let order: Vec<usize> = (0..k).collect();
            (prepared.value_of(&order, config, &mut scratch), 1)
        }
        Some(weights) => {
            let mut walk = Enumeration {
                prepared: &prepared,
                config,
                weights: &weights,
                used: vec![false; k],
                order: Vec::with_capacity(k),
                scratch,
                total: 0.0,
                count: 0,
            };
            walk.descend(1.0);
            (walk.total, walk.count)
        }
    };
    Ok(MetricResult {
        prompt_id: case.prompt_id().to_string(),
        metric_name: config.metric_name(),
        value,
        num_trajectories_used: used,
        seed: config.seed,
        std_error: 0.0,
    })
}

struct Enumeration<'a> {
    prepared: &'a PreparedCase,
    config: &'a MetricConfig,
    weights: &'a [f64],
    used: Vec<bool>,
    order: Vec<usize>,
    scratch: Scratch,
    total: f64,
    count: usize,
}

impl Enumeration<'_> {
    fn descend(&mut self, prob: f64) {
        let k = self.weights.len();
        if self.order.len() == k {
            let order = std::mem::take(&mut self.order);
            self.total += prob
                * self
                    .prepared
                    .value_of(&order, self.config, &mut self.scratch);
            self.order = order;
            self.count += 1;
            return;
        }
        let remaining: f64 = (0..k)
            .filter(|&i| !self.used[i])
            .map(|i| self.weights[i])
            .sum();
        if remaining > 0.0 {
            for i in 0..k {
                if self.used[i] || self.weights[i] == 0.0 {
                    continue;
                }
                self.step(i, prob * self.weights[i] / remaining);
            }
        } else {
            // Only zero-weight positions remain; the sampler emits them in index order.
            let next = (0..k)
                .find(|&i| !self.used[i])
                .expect("unfinished order has a free slot");
            self.step(next, prob);
        }
    }

    fn step(&mut self, i: usize, prob: f64) {
        self.used[i] = true;
        self.order.push(i);
        self.descend(prob);
        self.order.pop();
        self.used[i] = false;
    }
}
