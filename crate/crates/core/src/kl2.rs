//! Symmetric Kullback-Leibler (KL2) distance between Gaussian segment statistics.
//!
//! KL2(A, B) = C(A, B) + M(A, B) where
//!
//! * C(A, B) = ½[tr(σ_A⁻¹σ_B) + tr(σ_B⁻¹σ_A)] − d  depends only on covariances,
//! * M(A, B) = (μ_A − μ_B)(σ_A⁻¹ + σ_B⁻¹)(μ_A − μ_B)ᵀ  is a quadratic form in the mean difference.
//!
//! None of these functions regularize: a covariance that fails to factor is an
//! error here, and any ridge must already have been applied by
//! [`compute_stats`](crate::stats::compute_stats).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::stats::{precision, SegmentStats};

/// Negative values closer to zero than this are rounding noise and clamp to 0.
const CLAMP_TOLERANCE: f64 = 1e-9;

fn check_dims(a: &SegmentStats, b: &SegmentStats) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// tr(P S) for symmetric P and S, as the sum of the elementwise product.
fn trace_of_product(p: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    p.iter().zip(s.iter()).map(|(x, y)| x * y).sum()
}

fn clamp_nonnegative(v: f64, what: &str) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -CLAMP_TOLERANCE {
        Ok(0.0)
    } else {
        Err(Error::NumericalAnomaly(format!("{what} = {v:e} is negative")))
    }
}

/// Asymmetric term tr(σ_b⁻¹ σ_a).
pub fn trace_term(a: &SegmentStats, b: &SegmentStats) -> Result<f64> {
    check_dims(a, b)?;
    let pb = precision(b)?;
    Ok(trace_of_product(&pb, &a.covariance))
}

/// Precomputed precisions for repeated distance evaluation.
#[derive(Debug, Clone)]
pub struct PreparedStats {
    pub stats: SegmentStats,
    pub precision: DMatrix<f64>,
}

impl PreparedStats {
    pub fn new(stats: SegmentStats) -> Result<Self> {
        let precision = precision(&stats)?;
        Ok(Self { stats, precision })
    }
}

/// The two parts of KL2 for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kl2Parts {
    pub covariance: f64,
    pub mean: f64,
}

impl Kl2Parts {
    pub fn total(&self) -> f64 {
        self.covariance + self.mean
    }
}

/// Computes C and M for a prepared pair. Both returned values are ≥ 0.
pub fn kl2_parts(a: &PreparedStats, b: &PreparedStats) -> Result<Kl2Parts> {
    check_dims(&a.stats, &b.stats)?;
    if a.stats.mean == b.stats.mean && a.stats.covariance == b.stats.covariance {
        return Ok(Kl2Parts { covariance: 0.0, mean: 0.0 });
    }
    let d = a.stats.dim() as f64;
    let ab = trace_of_product(&b.precision, &a.stats.covariance);
    let ba = trace_of_product(&a.precision, &b.stats.covariance);
    let c = clamp_nonnegative(0.5 * (ab + ba) - d, "covariance term")?;

    let delta = &a.stats.mean - &b.stats.mean;
    let psum = &a.precision + &b.precision;
    let m = clamp_nonnegative(delta.dot(&(&psum * &delta)), "mean term")?;
    if !(c.is_finite() && m.is_finite()) {
        return Err(Error::NumericalAnomaly("non-finite KL2 term".into()));
    }
    Ok(Kl2Parts {
        covariance: c,
        mean: m,
    })
}

fn parts(a: &SegmentStats, b: &SegmentStats) -> Result<Kl2Parts> {
    check_dims(a, b)?;
    kl2_parts(&PreparedStats::new(a.clone())?, &PreparedStats::new(b.clone())?)
}

/// C(A, B) = ½[tr(σ_A⁻¹σ_B) + tr(σ_B⁻¹σ_A)] − d.
pub fn covariance_term(a: &SegmentStats, b: &SegmentStats) -> Result<f64> {
    Ok(parts(a, b)?.covariance)
}

/// M(A, B) = δ(σ_A⁻¹ + σ_B⁻¹)δᵀ with δ = μ_A − μ_B.
pub fn mean_term(a: &SegmentStats, b: &SegmentStats) -> Result<f64> {
    Ok(parts(a, b)?.mean)
}

pub fn kl2(a: &SegmentStats, b: &SegmentStats) -> Result<f64> {
    Ok(parts(a, b)?.total())
}

/// KL2 without the mean term; identical to [`covariance_term`].
pub fn kl2_no_mean(a: &SegmentStats, b: &SegmentStats) -> Result<f64> {
    covariance_term(a, b)
}
