//! Set-based evaluation of generated image grids.
//!
//! A grid is scored by simulating a user who inspects its images in some
//! order (a trajectory). Relevance comes from embedding similarity to target
//! exemplars, the user model is position-based (RBP) or cascade (ERR), the
//! relevance can be discounted by novelty against images seen earlier, and the
//! metric is averaged over trajectories drawn from a Plackett-Luce law on
//! saliency (or uniformly).
//!
//! Besides the metrics the crate carries the Diversity and FID baselines,
//! the agreement statistics used to validate metrics against human
//! preferences, and the interchange formats driven by the `setwise` CLI.

pub mod baselines;
pub mod config;
pub mod embedding;
pub mod error;
pub mod expectation;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod stats;
pub mod trajectory;

pub use nalgebra;

pub use config::{MetricConfig, MetricVariant, Satiation, TrajectoryDist, UserModel};
pub use embedding::{cosine_similarity, relevance, Embedding, RelevanceAgg};
pub use error::{EvalError, Result};
pub use expectation::{exact_expected_metric, expected_metric, MetricResult, PreparedCase};
pub use grid::{GridCase, GridImage};
pub use trajectory::{plackett_luce_probability, sample_trajectory, Trajectory};
