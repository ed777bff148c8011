//! Length-aware distances for speaker clustering.
//!
//! The symmetric Kullback-Leibler (KL2) distance between Gaussian segment
//! models is inflated when either segment is short, because the sample
//! covariance of a short segment is a poor estimate. This crate measures that
//! inflation by simulation ([`calibration`]), divides it out of observed
//! distances, and clusters segments agglomeratively with either the raw or the
//! corrected measure. Two vector-quantization measures ([`vq`]) are provided
//! for comparison.
//!
//! Typical flow:
//!
//! 1. [`features::load_wav`] + [`features::extract_mfcc`] (or
//!    [`features::read_features`]) to get one [`FeatureMatrix`] per segment.
//! 2. [`calibration::simulate_surface`] once per metric and dimensionality.
//! 3. [`clustering::pairwise_distances`] with the surface, then
//!    [`clustering::agglomerate`] and a cut.

pub mod calibration;
pub mod clustering;
pub mod error;
pub mod features;
pub mod kl2;
pub mod metric;
pub mod rng;
pub mod stats;
pub mod sweep;
pub mod synth;
pub mod vq;

pub use calibration::{CorrectionSurface, SimulationConfig, SimulationReport};
pub use clustering::{ClusterAssignment, Dendrogram, DistanceMatrix};
pub use error::{Error, Result};
pub use features::{AudioBuffer, FeatureMatrix, FrameConfig};
pub use metric::{MetricConfig, MetricKind};
pub use stats::{RegularizationPolicy, SegmentStats};
pub use synth::{ClusterScore, DatasetManifest, SyntheticSpec};
pub use vq::Codebook;
