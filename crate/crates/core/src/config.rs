//! Metric configuration and the six named metric variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::RelevanceAgg;
use crate::error::{EvalError, Result};

pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_TRAJECTORIES: usize = 100;

/// How the simulated user decides to keep inspecting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserModel {
    /// Position `i` is reached with probability `gamma^(i-1)`.
    Position,
    /// Position-based reach, additionally stopped by satiation.
    Cascade,
}

/// Distribution over inspection orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryDist {
    /// Plackett-Luce over normalized saliency.
    Saliency,
    /// Plackett-Luce with equal weights, i.e. uniform over permutations.
    Uniform,
    /// The single row-major trajectory.
    ReadingOrder,
}

impl TrajectoryDist {
    fn as_str(self) -> &'static str {
        match self {
            TrajectoryDist::Saliency => "saliency",
            TrajectoryDist::Uniform => "uniform",
            TrajectoryDist::ReadingOrder => "reading_order",
        }
    }
}

/// Probability that the user is satisfied by an image of a given relevance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Satiation {
    /// `s(r) = r`
    #[default]
    Identity,
    /// `s(r) = 0`; the cascade degenerates to the position model.
    Zero,
    /// `s(r) = c * r`, `c` in `[0, 1]`
    Linear(f64),
    /// `s(r) = r^p`, `p > 0`
    Power(f64),
}

impl Satiation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Satiation::Identity | Satiation::Zero => Ok(()),
            Satiation::Linear(c) if (0.0..=1.0).contains(&c) => Ok(()),
            Satiation::Power(p) if p.is_finite() && p > 0.0 => Ok(()),
            other => Err(EvalError::Config(format!(
                "satiation {other} is not a monotone map into [0,1]"
            ))),
        }
    }

    pub fn apply(&self, relevance: f64) -> f64 {
        match *self {
            Satiation::Identity => relevance,
            Satiation::Zero => 0.0,
            Satiation::Linear(c) => c * relevance,
            Satiation::Power(p) => relevance.powf(p),
        }
    }
}

impl fmt::Display for Satiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Satiation::Identity => write!(f, "identity"),
            Satiation::Zero => write!(f, "zero"),
            Satiation::Linear(c) => write!(f, "linear:{c}"),
            Satiation::Power(p) => write!(f, "power:{p}"),
        }
    }
}

impl FromStr for Satiation {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self> {
        let parse_param = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| EvalError::Config(format!("bad satiation parameter in {s:?}")))
        };
        let sat = match s.split_once(':') {
            None if s == "identity" => Satiation::Identity,
            None if s == "zero" => Satiation::Zero,
            Some(("linear", v)) => Satiation::Linear(parse_param(v)?),
            Some(("power", v)) => Satiation::Power(parse_param(v)?),
            _ => return Err(EvalError::Config(format!("unknown satiation {s:?}"))),
        };
        sat.validate()?;
        Ok(sat)
    }
}

impl TryFrom<String> for Satiation {
    type Error = EvalError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Satiation> for String {
    fn from(s: Satiation) -> String {
        s.to_string()
    }
}

/// Full specification of one expected-metric computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub user_model: UserModel,
    pub novelty: bool,
    pub trajectory_dist: TrajectoryDist,
    pub gamma: f64,
    pub satiation: Satiation,
    pub relevance_agg: RelevanceAgg,
    pub num_trajectories: usize,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            user_model: UserModel::Position,
            novelty: false,
            trajectory_dist: TrajectoryDist::Saliency,
            gamma: DEFAULT_GAMMA,
            satiation: Satiation::Identity,
            relevance_agg: RelevanceAgg::Max,
            num_trajectories: DEFAULT_TRAJECTORIES,
            seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn for_variant(variant: MetricVariant) -> Self {
        let (user_model, novelty, trajectory_dist) = variant.parts();
        Self {
            user_model,
            novelty,
            trajectory_dist,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trajectories(mut self, n: usize) -> Self {
        self.num_trajectories = n;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_gamma(self.gamma)?;
        if self.num_trajectories == 0 {
            return Err(EvalError::Config(
                "num_trajectories must be at least 1".into(),
            ));
        }
        self.satiation.validate()
    }

    /// The named variant this configuration realizes, if any.
    pub fn variant(&self) -> Option<MetricVariant> {
        MetricVariant::ALL
            .into_iter()
            .find(|v| v.parts() == (self.user_model, self.novelty, self.trajectory_dist))
    }

    /// Canonical variant name, or a descriptive `[nov]<base>@<dist>` name otherwise.
    pub fn metric_name(&self) -> String {
        if let Some(v) = self.variant() {
            return v.name().to_string();
        }
        let base = match self.user_model {
            UserModel::Position => "rbp",
            UserModel::Cascade => "err",
        };
        let nov = if self.novelty { "nov" } else { "" };
        format!("{nov}{base}@{}", self.trajectory_dist.as_str())
    }
}

pub fn validate_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(EvalError::Config(format!("gamma {gamma} outside (0, 1]")))
    }
}

/// The six metric variants: user model x relevance discount x trajectory law.
///
/// | name   | user model | relevance      | trajectories |
/// |--------|------------|----------------|--------------|
/// | rbp    | position   | r(x)           | saliency     |
/// | urbp   | position   | r(x) * nov     | uniform      |
/// | novrbp | position   | r(x) * nov     | saliency     |
/// | err    | cascade    | r(x)           | saliency     |
/// | uerr   | cascade    | r(x) * nov     | uniform      |
/// | noverr | cascade    | r(x) * nov     | saliency     |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricVariant {
    Rbp,
    Urbp,
    Novrbp,
    Err,
    Uerr,
    Noverr,
}

impl MetricVariant {
    pub const ALL: [MetricVariant; 6] = [
        MetricVariant::Rbp,
        MetricVariant::Urbp,
        MetricVariant::Novrbp,
        MetricVariant::Err,
        MetricVariant::Uerr,
        MetricVariant::Noverr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricVariant::Rbp => "rbp",
            MetricVariant::Urbp => "urbp",
            MetricVariant::Novrbp => "novrbp",
            MetricVariant::Err => "err",
            MetricVariant::Uerr => "uerr",
            MetricVariant::Noverr => "noverr",
        }
    }

    pub fn parts(self) -> (UserModel, bool, TrajectoryDist) {
        use TrajectoryDist::*;
        use UserModel::*;
        match self {
            MetricVariant::Rbp => (Position, false, Saliency),
            MetricVariant::Urbp => (Position, true, Uniform),
            MetricVariant::Novrbp => (Position, true, Saliency),
            MetricVariant::Err => (Cascade, false, Saliency),
            MetricVariant::Uerr => (Cascade, true, Uniform),
            MetricVariant::Noverr => (Cascade, true, Saliency),
        }
    }
}

impl fmt::Display for MetricVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricVariant {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self> {
        MetricVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| EvalError::Config(format!("unknown metric variant {s:?}")))
    }
}
