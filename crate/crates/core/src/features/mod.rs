//! Audio decoding, MFCC extraction and the feature CSV format.
//!
//! Everything downstream of this module works on [`FeatureMatrix`] values, so
//! experiments can run from feature files alone without touching audio.

mod csv_io;
mod mfcc;
mod wav;

pub use csv_io::{read_features, write_features};
pub use mfcc::{extract_mfcc, frame_count, FrameConfig};
pub use wav::{load_wav, AudioBuffer};

use crate::error::{Error, Result};

/// An ordered sequence of `dim`-dimensional feature vectors for one segment.
///
/// Stored row-major; `rows()` is the segment length in frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    segment_id: String,
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    pub sample_rate: Option<u32>,
    pub hop_ms: Option<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major data. Rejects empty, ragged or non-finite input.
    pub fn new(segment_id: impl Into<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::MalformedRow {
                line: 0,
                reason: format!("{} values do not divide into rows of {dim}", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!(
                "row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            segment_id: segment_id.into(),
            rows: data.len() / dim,
            dim,
            data,
            sample_rate: None,
            hop_ms: None,
        })
    }

    pub fn from_rows(segment_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::MalformedRow {
                    line: i + 1,
                    reason: format!("expected {dim} fields, found {}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(segment_id, dim, data)
    }

    pub fn segment_id(&self) -> &str {
        &self.segment_id
    }

    pub fn set_segment_id(&mut self, id: impl Into<String>) {
        self.segment_id = id.into();
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, segment_id: impl Into<String>, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self::new(segment_id, self.dim, data)
    }

    /// Appends the rows of `other` (same dim).
    pub fn concat(&self, other: &FeatureMatrix) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::new(self.segment_id.clone(), self.dim, data)
    }
}
