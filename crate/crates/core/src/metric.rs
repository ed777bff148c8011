//! Metric selection shared by calibration and clustering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::kl2::{kl2_parts, Kl2Parts, PreparedStats};
use crate::stats::{compute_stats, RegularizationPolicy};
use crate::vq::{aqd_distance_with, train_codebook, vq_distance, Codebook, DEFAULT_CODEBOOK_K};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "kl2")]
    Kl2,
    #[serde(rename = "kl2_no_mean")]
    Kl2NoMean,
    #[serde(rename = "vq")]
    Vq,
    #[serde(rename = "aqd")]
    Aqd,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [Self::Kl2, Self::Kl2NoMean, Self::Vq, Self::Aqd];

    pub fn id(self) -> &'static str {
        match self {
            Self::Kl2 => "kl2",
            Self::Kl2NoMean => "kl2_no_mean",
            Self::Vq => "vq",
            Self::Aqd => "aqd",
        }
    }

    pub fn is_kl2_family(self) -> bool {
        matches!(self, Self::Kl2 | Self::Kl2NoMean)
    }

    pub fn uses_codebooks(self) -> bool {
        !self.is_kl2_family()
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric {s:?}")))
    }
}

/// A metric plus the parameters it needs to turn a feature matrix into a model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    pub kind: MetricKind,
    pub codebook_k: usize,
    /// Seed for codebook training (VQ family only).
    pub codebook_seed: u64,
    pub policy: RegularizationPolicy,
}

impl MetricConfig {
    pub fn new(kind: MetricKind) -> Self {
        Self {
            kind,
            codebook_k: DEFAULT_CODEBOOK_K,
            codebook_seed: 0,
            policy: RegularizationPolicy::default(),
        }
    }

    pub fn with_codebook(mut self, k: usize, seed: u64) -> Self {
        self.codebook_k = k;
        self.codebook_seed = seed;
        self
    }

    /// Reduces a segment to whatever the metric compares.
    pub fn prepare(&self, m: &FeatureMatrix) -> Result<SegmentModel> {
        self.prepare_seeded(m, self.codebook_seed)
    }

    pub fn prepare_seeded(&self, m: &FeatureMatrix, seed: u64) -> Result<SegmentModel> {
        Ok(match self.kind {
            MetricKind::Kl2 | MetricKind::Kl2NoMean => {
                SegmentModel::Gaussian(PreparedStats::new(compute_stats(m, &self.policy)?)?)
            }
            MetricKind::Vq => SegmentModel::Codebook(train_codebook(m, self.codebook_k, seed)?),
            MetricKind::Aqd => SegmentModel::Features {
                book: train_codebook(m, self.codebook_k, seed)?,
                features: m.clone(),
            },
        })
    }

    /// Raw (uncorrected) distance between two prepared segments.
    pub fn distance(&self, a: &SegmentModel, b: &SegmentModel) -> Result<f64> {
        Ok(self.evaluate(a, b)?.value)
    }

    pub fn evaluate(&self, a: &SegmentModel, b: &SegmentModel) -> Result<Evaluation> {
        match (self.kind, a, b) {
            (MetricKind::Kl2, SegmentModel::Gaussian(x), SegmentModel::Gaussian(y)) => {
                let p = kl2_parts(x, y)?;
                Ok(Evaluation { value: p.total(), parts: Some(p) })
            }
            (MetricKind::Kl2NoMean, SegmentModel::Gaussian(x), SegmentModel::Gaussian(y)) => {
                let p = kl2_parts(x, y)?;
                Ok(Evaluation { value: p.covariance, parts: Some(p) })
            }
            (MetricKind::Vq, SegmentModel::Codebook(x), SegmentModel::Codebook(y)) => Ok(Evaluation {
                value: vq_distance(x, y)?,
                parts: None,
            }),
            (
                MetricKind::Aqd,
                SegmentModel::Features { features: fa, book: ba },
                SegmentModel::Features { features: fb, book: bb },
            ) => Ok(Evaluation {
                value: aqd_distance_with(fa, ba, fb, bb)?,
                parts: None,
            }),
            _ => Err(Error::InvalidConfig(format!(
                "segment models do not match metric {}",
                self.kind
            ))),
        }
    }
}

/// One metric evaluation; KL2-family metrics also report their two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub parts: Option<Kl2Parts>,
}

/// A segment reduced to the representation a metric compares.
#[derive(Debug, Clone)]
pub enum SegmentModel {
    Gaussian(PreparedStats),
    Codebook(Codebook),
    Features { features: FeatureMatrix, book: Codebook },
}

impl SegmentModel {
    pub fn was_regularized(&self) -> bool {
        matches!(self, SegmentModel::Gaussian(p) if p.stats.regularized)
    }
}
