//! Per-segment Gaussian statistics (mean, covariance, count).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// When and how much ridge to add to a sample covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationPolicy {
    /// Ridge weight relative to the mean variance trace(S)/d.
    pub epsilon_scale: f64,
    /// Covariances whose condition estimate exceeds this get the ridge.
    pub condition_limit: f64,
}

impl Default for RegularizationPolicy {
    fn default() -> Self {
        Self {
            epsilon_scale: 1e-6,
            condition_limit: 1e10,
        }
    }
}

impl RegularizationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_scale > 0.0) || !(self.condition_limit > 1.0) {
            return Err(Error::InvalidConfig(
                "need epsilon_scale > 0 and condition_limit > 1".into(),
            ));
        }
        Ok(())
    }
}

/// Sample mean, unbiased sample covariance and count of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub count: usize,
    pub regularized: bool,
}

impl SegmentStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Builds stats directly from parameters (count is informational).
    pub fn from_parts(mean: DVector<f64>, covariance: DMatrix<f64>, count: usize) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                left: mean.len(),
                right: covariance.nrows(),
            });
        }
        Ok(Self {
            mean,
            covariance,
            count,
            regularized: false,
        })
    }
}

/// Squared ratio of the largest to smallest Cholesky diagonal; `None` if the
/// factorization fails.
fn condition_estimate(cov: &DMatrix<f64>) -> Option<f64> {
    let l = cov.clone().cholesky()?.l();
    let diag = l.diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo <= 0.0 || !lo.is_finite() {
        return None;
    }
    Some((hi / lo).powi(2))
}

pub fn compute_stats(m: &FeatureMatrix, policy: &RegularizationPolicy) -> Result<SegmentStats> {
    let n = m.rows();
    let d = m.dim();
    if n < 2 {
        return Err(Error::InsufficientData { rows: n, needed: 2 });
    }

    let mut mean = DVector::<f64>::zeros(d);
    for row in m.iter_rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean /= n as f64;

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in m.iter_rows() {
        for ((c, v), mu) in centered.iter_mut().zip(row).zip(mean.iter()) {
            *c = v - mu;
        }
        for j in 0..d {
            let cj = centered[j];
            for i in j..d {
                cov[(i, j)] += centered[i] * cj;
            }
        }
    }
    cov /= (n - 1) as f64;
    for j in 0..d {
        for i in (j + 1)..d {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    if cov.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(format!(
            "statistics of segment {}",
            m.segment_id()
        )));
    }

    let needs_ridge = match condition_estimate(&cov) {
        Some(c) => c > policy.condition_limit,
        None => true,
    };
    if needs_ridge {
        let trace = cov.trace();
        let eps = if trace > 0.0 {
            policy.epsilon_scale * trace / d as f64
        } else {
            policy.epsilon_scale
        };
        for i in 0..d {
            cov[(i, i)] += eps;
        }
    }

    Ok(SegmentStats {
        mean,
        covariance: cov,
        count: n,
        regularized: needs_ridge,
    })
}

/// Inverse covariance via Cholesky.
pub fn precision(stats: &SegmentStats) -> Result<DMatrix<f64>> {
    let chol = stats
        .covariance
        .clone()
        .cholesky()
        .ok_or(Error::SingularCovariance)?;
    let inv = chol.inverse();
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    Ok(inv)
}
