//! Set-level baselines: within-grid diversity and population FID.

mod diversity;
mod fid;

pub use diversity::{diversity, mean_pairwise_similarity};
pub use fid::{
    frechet_distance, gaussian_summary, gaussian_summary_of_rows, population_fid_report,
    trace_sqrt_product, GaussianSummary, PopulationFid, DEFAULT_EPS,
};
