use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

/// Direction of a pairwise preference between system X and system Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    XBetter,
    Same,
    YBetter,
}

/// 1-2 favour X, 3 is a tie, 4-5 favour Y.
pub fn collapse_to_direction(rating: u8) -> Result<Direction> {
    match rating {
        1 | 2 => Ok(Direction::XBetter),
        3 => Ok(Direction::Same),
        4 | 5 => Ok(Direction::YBetter),
        r => Err(EvalError::Ingestion(format!(
            "Likert rating {r} outside 1..=5"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusScale {
    /// Raw five-point Likert labels.
    Five,
    /// Directional collapse of the five-point scale.
    Three,
}

impl ConsensusScale {
    pub fn categories(self) -> usize {
        match self {
            ConsensusScale::Five => 5,
            ConsensusScale::Three => 3,
        }
    }

    /// Zero-based category of a rating on this scale.
    pub fn category(self, rating: u8) -> Result<usize> {
        let dir = collapse_to_direction(rating)?;
        Ok(match self {
            ConsensusScale::Five => rating as usize - 1,
            ConsensusScale::Three => match dir {
                Direction::XBetter => 0,
                Direction::Same => 1,
                Direction::YBetter => 2,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    #[serde(rename = "3of3")]
    ThreeOfThree,
    #[serde(rename = "2of3")]
    TwoOfThree,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Likert(u8),
    Direction(Direction),
}

impl Label {
    pub fn direction(self) -> Direction {
        match self {
            Label::Likert(r) => collapse_to_direction(r).expect("validated at construction"),
            Label::Direction(d) => d,
        }
    }
}

/// Majority label of three judgments; `label` is `None` exactly when `support` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusLabel {
    pub scale: ConsensusScale,
    pub label: Option<Label>,
    pub support: Support,
}

impl ConsensusLabel {
    pub fn direction(&self) -> Option<Direction> {
        self.label.map(Label::direction)
    }

    pub fn is_unanimous(&self) -> bool {
        self.support == Support::ThreeOfThree
    }
}

pub fn consensus(ratings: [u8; 3], scale: ConsensusScale) -> Result<ConsensusLabel> {
    let labels = ratings
        .iter()
        .map(|&r| {
            let dir = collapse_to_direction(r)?;
            Ok(match scale {
                ConsensusScale::Five => Label::Likert(r),
                ConsensusScale::Three => Label::Direction(dir),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (label, support) = match (
        labels[0] == labels[1],
        labels[1] == labels[2],
        labels[0] == labels[2],
    ) {
        (true, true, _) => (Some(labels[0]), Support::ThreeOfThree),
        (true, false, _) | (false, false, true) => (Some(labels[0]), Support::TwoOfThree),
        (false, true, false) => (Some(labels[1]), Support::TwoOfThree),
        _ => (None, Support::None),
    };
    Ok(ConsensusLabel {
        scale,
        label,
        support,
    })
}

/// Share of items with no majority, a 2-of-3 majority, and unanimity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusBreakdown {
    pub items: usize,
    pub none: f64,
    pub two_of_three: f64,
    pub three_of_three: f64,
}

pub fn consensus_breakdown(
    ratings: &[[u8; 3]],
    scale: ConsensusScale,
) -> Result<ConsensusBreakdown> {
    if ratings.is_empty() {
        return Err(EvalError::EmptySample("no annotated items".into()));
    }
    let mut counts = [0usize; 3];
    for r in ratings {
        match consensus(*r, scale)?.support {
            Support::None => counts[0] += 1,
            Support::TwoOfThree => counts[1] += 1,
            Support::ThreeOfThree => counts[2] += 1,
        }
    }
    let n = ratings.len() as f64;
    Ok(ConsensusBreakdown {
        items: ratings.len(),
        none: counts[0] as f64 / n,
        two_of_three: counts[1] as f64 / n,
        three_of_three: counts[2] as f64 / n,
    })
}
