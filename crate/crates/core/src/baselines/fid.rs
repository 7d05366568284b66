//! Fréchet distance between Gaussian fits of two embedding populations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{EvalError, Result};

/// Diagonal regularization added to every sample covariance.
pub const DEFAULT_EPS: f64 = 1e-6;

const SYMMETRY_TOL: f64 = 1e-10;
const NEGATIVE_FLOOR: f64 = 1e-8;

/// Mean and covariance of an embedding population.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    sample_count: usize,
}

impl GaussianSummary {
    pub fn from_parts(
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        sample_count: usize,
    ) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.nrows() != d || covariance.ncols() != d {
            return Err(EvalError::InvalidInput(format!(
                "covariance {}x{} does not match mean of dimension {d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if sample_count < 2 {
            return Err(EvalError::InvalidInput(
                "a Gaussian summary needs at least 2 samples".into(),
            ));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(EvalError::InvalidInput("non-finite moment".into()));
        }
        for i in 0..d {
            if covariance[(i, i)] < 0.0 {
                return Err(EvalError::InvalidInput(format!("negative variance at {i}")));
            }
            for j in i + 1..d {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(EvalError::InvalidInput(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            mean,
            covariance,
            sample_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }
}

/// Sample mean and unbiased covariance (`n - 1`), plus `eps * I`.
pub fn gaussian_summary(embeddings: &[Embedding], eps: f64) -> Result<GaussianSummary> {
    let rows: Vec<&[f64]> = embeddings.iter().map(|e| e.values()).collect();
    gaussian_summary_of_rows(&rows, eps)
}

pub fn gaussian_summary_of_rows(rows: &[&[f64]], eps: f64) -> Result<GaussianSummary> {
    let n = rows.len();
    if n < 2 {
        return Err(EvalError::InvalidInput(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(EvalError::Config(format!(
            "covariance eps {eps} must be a nonnegative number"
        )));
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(EvalError::Ingestion(format!(
            "sample of dimension {} among dimension {d}",
            r.len()
        )));
    }
    let mut mean = DVector::zeros(d);
    for r in rows {
        mean += DVector::from_column_slice(r);
    }
    mean /= n as f64;
    let mut centered = DMatrix::zeros(n, d);
    for (i, r) in rows.iter().enumerate() {
        for j in 0..d {
            centered[(i, j)] = r[j] - mean[j];
        }
    }
    let mut covariance = centered.tr_mul(&centered) / (n - 1) as f64;
    // Exact symmetry; the product is symmetric only up to rounding.
    for i in 0..d {
        for j in i + 1..d {
            let v = 0.5 * (covariance[(i, j)] + covariance[(j, i)]);
            covariance[(i, j)] = v;
            covariance[(j, i)] = v;
        }
        covariance[(i, i)] += eps;
    }
    GaussianSummary::from_parts(mean, covariance, n)
}

fn symmetric_eigenvalues(
    m: &DMatrix<f64>,
    what: &str,
) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let eig = SymmetricEigen::new(m.clone());
    if let Some(v) = eig.eigenvalues.iter().find(|v| !v.is_finite()) {
        return Err(EvalError::Numerical(format!(
            "non-finite eigenvalue {v} while decomposing {what}"
        )));
    }
    Ok(eig)
}

/// Principal square root of a symmetric positive semi-definite matrix.
fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigenvalues(m, "first covariance")?;
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// `Tr((A B)^(1/2))` through the symmetric form `A^(1/2) B A^(1/2)`.
pub fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let root_a = psd_sqrt(a)?;
    let inner = &root_a * b * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = symmetric_eigenvalues(&inner, "A^1/2 B A^1/2")?;
    Ok(eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum())
}

/// `|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2))`
pub fn frechet_distance(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(EvalError::InvalidInput(format!(
            "Fréchet distance between dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let traces = a.covariance.trace() + b.covariance.trace();
    let cross = trace_sqrt_product(&a.covariance, &b.covariance)?;
    let fid = mean_term + traces - 2.0 * cross;
    if !fid.is_finite() {
        return Err(EvalError::Numerical(format!(
            "Fréchet distance not finite (mean term {mean_term}, traces {traces}, cross {cross})"
        )));
    }
    if fid < 0.0 {
        let floor = NEGATIVE_FLOOR * traces.max(1.0);
        if fid < -floor {
            return Err(EvalError::Numerical(format!(
                "Fréchet distance {fid} below numerical floor -{floor:e} (traces {traces}, cross {cross})"
            )));
        }
        return Ok(0.0);
    }
    Ok(fid)
}

/// FID of the preferred and not-preferred populations against the targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationFid {
    pub preferred: f64,
    pub not_preferred: f64,
    pub eps: f64,
}

pub fn population_fid_report(
    preferred: &[Embedding],
    not_preferred: &[Embedding],
    targets: &[Embedding],
    eps: f64,
) -> Result<PopulationFid> {
    let t = gaussian_summary(targets, eps)?;
    let p = gaussian_summary(preferred, eps)?;
    let n = gaussian_summary(not_preferred, eps)?;
    Ok(PopulationFid {
        preferred: frechet_distance(&t, &p)?,
        not_preferred: frechet_distance(&t, &n)?,
        eps,
    })
}
