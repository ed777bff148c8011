use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::calibration::{corrected_distance, CorrectionSurface};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::metric::{MetricConfig, MetricKind, SegmentModel};

/// Symmetric pairwise distances between segments, zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    pub lengths: Vec<usize>,
    values: Vec<f64>,
    pub metric_descriptor: String,
}

impl DistanceMatrix {
    /// Validates symmetry (1e-9), zero diagonal and finite non-negative entries.
    pub fn new(
        ids: Vec<String>,
        lengths: Vec<usize>,
        values: Vec<Vec<f64>>,
        metric_descriptor: impl Into<String>,
    ) -> Result<Self> {
        let n = ids.len();
        if lengths.len() != n || values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                left: n,
                right: values.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::IdMismatch(format!("duplicate id {dup}")));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return Err(Error::InvalidConfig(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = values[i][j];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::NonFiniteValue(format!("distance ({i}, {j}) = {v}")));
                }
                if (v - values[j][i]).abs() > 1e-9 * v.abs().max(1.0) {
                    return Err(Error::InvalidConfig(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            ids,
            lengths,
            values: values.into_iter().flatten().collect(),
            metric_descriptor: metric_descriptor.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.len().max(1))
    }

    /// Off-diagonal upper-triangle entries in row order.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect()
    }

    /// Reorders segments by `perm` (new position k holds old index `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.len();
        let mut values = Vec::with_capacity(n * n);
        for &i in perm {
            for &j in perm {
                values.push(self.get(i, j));
            }
        }
        Self {
            ids: perm.iter().map(|&i| self.ids[i].clone()).collect(),
            lengths: perm.iter().map(|&i| self.lengths[i]).collect(),
            values,
            metric_descriptor: self.metric_descriptor.clone(),
        }
    }
}

/// Describes a metric and optional surface for the matrix metadata.
pub fn metric_descriptor(metric: &MetricConfig, surface: Option<&CorrectionSurface>) -> String {
    let base = match metric.kind {
        MetricKind::Vq | MetricKind::Aqd => format!("{}(k={})", metric.kind, metric.codebook_k),
        _ => metric.kind.to_string(),
    };
    match surface {
        Some(s) => format!("{base}/corrected:{}", s.descriptor()),
        None => format!("{base}/raw"),
    }
}

/// Computes every unordered pair once (in parallel on the current rayon pool),
/// optionally dividing by the surface at the two segment lengths.
///
/// VQ divergences can dip below zero when cell weights disagree; such values
/// are clamped to 0 so the result is a valid dissimilarity.
pub fn pairwise_distances(
    segments: &[FeatureMatrix],
    metric: &MetricConfig,
    surface: Option<&CorrectionSurface>,
) -> Result<DistanceMatrix> {
    if segments.len() < 2 {
        return Err(Error::InsufficientData {
            rows: segments.len(),
            needed: 2,
        });
    }
    let dim = segments[0].dim();
    if let Some(s) = segments.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: s.dim(),
        });
    }
    if let Some(s) = surface {
        if s.metric_id != metric.kind {
            return Err(Error::InvalidConfig(format!(
                "surface was simulated for {} but metric is {}",
                s.metric_id, metric.kind
            )));
        }
        if s.dim != dim {
            return Err(Error::DimensionMismatch {
                left: s.dim,
                right: dim,
            });
        }
    }

    let models: Vec<SegmentModel> = segments
        .par_iter()
        .map(|s| {
            metric.prepare(s).map_err(|e| Error::PairFailure {
                a: s.segment_id().to_string(),
                b: s.segment_id().to_string(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let n = segments.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let wrap = |e: Error| Error::PairFailure {
                a: segments[i].segment_id().to_string(),
                b: segments[j].segment_id().to_string(),
                source: Box::new(e),
            };
            let mut raw = metric.distance(&models[i], &models[j]).map_err(wrap)?;
            if metric.kind == MetricKind::Vq {
                raw = raw.max(0.0);
            }
            match surface {
                Some(s) => corrected_distance(raw, s, segments[i].rows(), segments[j].rows())
                    .map_err(wrap),
                None => Ok(raw),
            }
        })
        .collect::<Result<_>>()?;

    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), &d) in pairs.iter().zip(&dists) {
        values[i][j] = d;
        values[j][i] = d;
    }
    DistanceMatrix::new(
        segments.iter().map(|s| s.segment_id().to_string()).collect(),
        segments.iter().map(FeatureMatrix::rows).collect(),
        values,
        metric_descriptor(metric, surface),
    )
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains([',', '\n', '\r', '"']) || id.starts_with('#') {
        return Err(Error::IdMismatch(format!(
            "segment id {id:?} cannot be written to CSV"
        )));
    }
    Ok(())
}

/// Renders the matrix CSV: `#` metadata lines, then a header row of ids and
/// one row per segment led by its id.
pub fn distance_matrix_to_string(d: &DistanceMatrix) -> Result<String> {
    for id in &d.ids {
        check_id(id)?;
    }
    let mut out = Vec::new();
    writeln!(out, "# metric_descriptor={}", d.metric_descriptor)?;
    let lengths: Vec<String> = d.lengths.iter().map(usize::to_string).collect();
    writeln!(out, "# lengths={}", lengths.join(";"))?;
    writeln!(out, "id,{}", d.ids.join(","))?;
    for (id, row) in d.ids.iter().zip(d.rows()) {
        write!(out, "{id}")?;
        for v in row {
            write!(out, ",{v:?}")?;
        }
        writeln!(out)?;
    }
    Ok(String::from_utf8(out).expect("ascii output"))
}

pub fn write_distance_matrix(d: &DistanceMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, distance_matrix_to_string(d)?)?;
    Ok(())
}

pub fn distance_matrix_from_str(text: &str) -> Result<DistanceMatrix> {
    let mut descriptor = String::new();
    let mut lengths: Option<Vec<usize>> = None;
    let mut header: Option<Vec<String>> = None;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                match k.trim() {
                    "metric_descriptor" => descriptor = v.trim().to_string(),
                    "lengths" => {
                        let parsed = v
                            .trim()
                            .split(';')
                            .filter(|s| !s.is_empty())
                            .map(|s| s.trim().parse::<usize>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|e| Error::MalformedRow {
                                line: no + 1,
                                reason: format!("bad lengths: {e}"),
                            })?;
                        lengths = Some(parsed);
                    }
                    _ => {}
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match &header {
            None => header = Some(fields[1..].iter().map(|s| s.to_string()).collect()),
            Some(h) => {
                if fields.len() != h.len() + 1 {
                    return Err(Error::MalformedRow {
                        line: no + 1,
                        reason: format!("expected {} fields, found {}", h.len() + 1, fields.len()),
                    });
                }
                ids.push(fields[0].to_string());
                let row = fields[1..]
                    .iter()
                    .map(|f| {
                        f.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
                            line: no + 1,
                            reason: format!("not a number: {f:?}"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                values.push(row);
            }
        }
    }
    let header = header.ok_or(Error::EmptyInput)?;
    if header != ids {
        return Err(Error::IdMismatch("row ids do not match header ids".into()));
    }
    let lengths = lengths.unwrap_or_else(|| vec![0; ids.len()]);
    DistanceMatrix::new(ids, lengths, values, descriptor)
}

pub fn read_distance_matrix(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    distance_matrix_from_str(&text)
}
