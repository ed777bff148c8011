//! Labeled synthetic speaker datasets and clustering scores.
//!
//! Each synthetic speaker is a single Gaussian: a mean drawn from
//! N(0, separation²·I) and a covariance R·diag(λ)·Rᵀ with λ uniform in
//! [0.5, 2.0] and R a random rotation. Segments draw a uniform length from the
//! configured range and that many rows from their speaker.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::calibration::CorrectionSurface;
use crate::clustering::{agglomerate, pairwise_distances, ClusterAssignment};
use crate::error::{Error, Result};
use crate::features::{read_features, write_features, FeatureMatrix};
use crate::metric::MetricConfig;
use crate::rng::{random_rotation, rng_for, GaussianSource};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_speakers: usize,
    pub dim: usize,
    pub segments_per_speaker: usize,
    /// Inclusive (min, max) frame counts.
    pub length_range: (usize, usize),
    pub speaker_separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_speakers: 5,
            dim: 13,
            segments_per_speaker: 4,
            length_range: (600, 18_900),
            speaker_separation: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.num_speakers < 2 {
            return bad("need at least 2 speakers");
        }
        if self.segments_per_speaker == 0 {
            return bad("need at least 1 segment per speaker");
        }
        if self.length_range.0 < self.dim + 2 || self.length_range.0 > self.length_range.1 {
            return bad("need dim + 2 <= min frames <= max frames");
        }
        if !(self.speaker_separation > 0.0) {
            return bad("speaker_separation must be positive");
        }
        Ok(())
    }
}

/// One generated segment with its ground-truth speaker.
#[derive(Debug, Clone)]
pub struct LabeledSegment {
    pub features: FeatureMatrix,
    pub label: String,
}

fn speaker_source(spec: &SyntheticSpec, speaker: usize) -> GaussianSource {
    let d = spec.dim;
    let mut rng = rng_for(spec.seed, &[speaker as u64, 0]);
    let mean = DVector::from_fn(d, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        spec.speaker_separation * z
    });
    let eig = DVector::from_fn(d, |_, _| rng.random_range(0.5..=2.0));
    let rot = random_rotation(&mut rng, d);
    let mut cov = &rot * DMatrix::from_diagonal(&eig) * rot.transpose();
    cov = (&cov + cov.transpose()) * 0.5;
    GaussianSource::new(mean, cov).expect("eigenvalues are positive")
}

/// Generates the dataset in memory, speakers in order, segments in order.
pub fn synth_segments(spec: &SyntheticSpec) -> Result<Vec<LabeledSegment>> {
    spec.validate()?;
    let (lo, hi) = spec.length_range;
    let mut out = Vec::with_capacity(spec.num_speakers * spec.segments_per_speaker);
    for s in 0..spec.num_speakers {
        let source = speaker_source(spec, s);
        for j in 0..spec.segments_per_speaker {
            let mut rng = rng_for(spec.seed, &[s as u64, 1 + j as u64]);
            let n = rng.random_range(lo..=hi);
            let id = format!("spk{s:02}_seg{j:02}");
            out.push(LabeledSegment {
                features: source.sample(&mut rng, n, &id),
                label: format!("spk{s:02}"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub segment_id: String,
    pub path: PathBuf,
    pub label: String,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.csv";

impl DatasetManifest {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["segment_id", "path", "label", "frames"])
            .map_err(|e| Error::Io(e.into()))?;
        for e in &self.entries {
            w.write_record([
                e.segment_id.as_str(),
                &e.path.to_string_lossy(),
                e.label.as_str(),
                &e.frames.to_string(),
            ])
            .map_err(|e| Error::Io(e.into()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 fields"))
    }

    /// Parses a manifest; relative paths are resolved against `base`.
    pub fn from_csv(text: &str, base: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::MalformedRow { line: 1, reason: e.to_string() })?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["segment_id", "path", "label", "frames"] {
            return Err(Error::MalformedRow {
                line: 1,
                reason: "header must be segment_id,path,label,frames".into(),
            });
        }
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
            let frames = rec[3].trim().parse().map_err(|e| Error::MalformedRow {
                line,
                reason: format!("frames: {e}"),
            })?;
            let id = rec[0].to_string();
            if !seen.insert(id.clone()) {
                return Err(Error::IdMismatch(format!("duplicate segment id {id}")));
            }
            let p = PathBuf::from(&rec[1]);
            entries.push(ManifestEntry {
                segment_id: id,
                path: if p.is_relative() { base.join(p) } else { p },
                label: rec[2].to_string(),
                frames,
            });
        }
        Ok(Self { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_csv(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Loads every entry's features, using the manifest id as the segment id.
    pub fn load_segments(&self) -> Result<Vec<FeatureMatrix>> {
        self.entries
            .iter()
            .map(|e| {
                let mut m = read_features(&e.path)?;
                m.set_segment_id(e.segment_id.clone());
                Ok(m)
            })
            .collect()
    }
}

/// Writes one feature CSV per segment plus `manifest.csv` into `out_dir`.
pub fn synth_dataset(spec: &SyntheticSpec, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    let segments = synth_segments(spec)?;
    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(segments.len());
    for seg in &segments {
        let file = format!("{}.csv", seg.features.segment_id());
        write_features(&seg.features, out_dir.join(&file))?;
        entries.push(ManifestEntry {
            segment_id: seg.features.segment_id().to_string(),
            path: PathBuf::from(file),
            label: seg.label.clone(),
            frames: seg.features.rows(),
        });
    }
    let manifest = DatasetManifest { entries };
    fs::write(out_dir.join(MANIFEST_FILE), manifest.to_csv()?)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterScore {
    pub pairwise_precision: f64,
    pub pairwise_recall: f64,
    pub pairwise_f1: f64,
    pub purity: f64,
}

/// Scores predicted clusters against true labels given as `(id, label)` pairs.
pub fn score_labels(assign: &ClusterAssignment, truth: &[(String, String)]) -> Result<ClusterScore> {
    let pred = assign.as_map();
    if pred.len() != assign.ids.len() {
        return Err(Error::IdMismatch("duplicate ids in assignment".into()));
    }
    let truth_ids: HashSet<&str> = truth.iter().map(|(id, _)| id.as_str()).collect();
    if truth_ids.len() != truth.len() {
        return Err(Error::IdMismatch("duplicate ids in manifest".into()));
    }
    if truth_ids.len() != pred.len() || truth_ids.iter().any(|id| !pred.contains_key(id)) {
        return Err(Error::IdMismatch(
            "assignment ids differ from manifest ids".into(),
        ));
    }

    let items: Vec<(usize, &str)> = truth
        .iter()
        .map(|(id, l)| (pred[id.as_str()], l.as_str()))
        .collect();
    let (mut tp, mut pred_pairs, mut true_pairs) = (0usize, 0usize, 0usize);
    for i in 0..items.len() {
        for j in (i + 1)..items.len() {
            let same_pred = items[i].0 == items[j].0;
            let same_true = items[i].1 == items[j].1;
            tp += (same_pred && same_true) as usize;
            pred_pairs += same_pred as usize;
            true_pairs += same_true as usize;
        }
    }
    let precision = if pred_pairs == 0 { 1.0 } else { tp as f64 / pred_pairs as f64 };
    let recall = if true_pairs == 0 { 1.0 } else { tp as f64 / true_pairs as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    let mut counts: HashMap<usize, HashMap<&str, usize>> = HashMap::new();
    for &(c, l) in &items {
        *counts.entry(c).or_default().entry(l).or_default() += 1;
    }
    let majority: usize = counts.values().map(|m| m.values().max().copied().unwrap_or(0)).sum();
    Ok(ClusterScore {
        pairwise_precision: precision,
        pairwise_recall: recall,
        pairwise_f1: f1,
        purity: majority as f64 / items.len().max(1) as f64,
    })
}

pub fn evaluate(assign: &ClusterAssignment, manifest: &DatasetManifest) -> Result<ClusterScore> {
    let truth: Vec<(String, String)> = manifest
        .entries
        .iter()
        .map(|e| (e.segment_id.clone(), e.label.clone()))
        .collect();
    score_labels(assign, &truth)
}

/// Distance matrix → UPGMA → cut into `k` clusters → score.
pub fn cluster_and_score(
    segments: &[LabeledSegment],
    metric: &MetricConfig,
    surface: Option<&CorrectionSurface>,
    k: usize,
) -> Result<ClusterScore> {
    let feats: Vec<FeatureMatrix> = segments.iter().map(|s| s.features.clone()).collect();
    let d = pairwise_distances(&feats, metric, surface)?;
    let assign = agglomerate(&d).cut_k(k)?;
    let truth: Vec<(String, String)> = segments
        .iter()
        .map(|s| (s.features.segment_id().to_string(), s.label.clone()))
        .collect();
    score_labels(&assign, &truth)
}
