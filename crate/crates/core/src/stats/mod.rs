//! Statistics for validating metrics against pairwise human preferences.

mod agreement;
mod consensus;
mod fleiss;
mod wilcoxon;

pub use agreement::{agreement_rate, preference_pairs, Agreement, DEFAULT_TIE_EPS};
pub use consensus::{
    collapse_to_direction, consensus, consensus_breakdown, ConsensusBreakdown, ConsensusLabel,
    ConsensusScale, Direction, Label, Support,
};
pub use fleiss::{category_counts, fleiss_kappa};
pub use wilcoxon::{
    wilcoxon_from_differences, wilcoxon_signed_rank, WilcoxonResult, EXACT_MAX_N, MIN_N,
};
