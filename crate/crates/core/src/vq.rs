//! Vector-quantization distances between segments.
//!
//! Two measures are provided:
//!
//! * [`vq_distance`] compares two weighted codebooks directly: each centroid is
//!   matched to the nearest centroid of the other codebook and charged half the
//!   squared distance plus the log ratio of the two cell weights, symmetrized.
//! * [`aqd`] / [`aqd_distance`] score raw feature vectors against a codebook by
//!   their average quantization distortion. Dividing by the number of query
//!   vectors makes the score insensitive to query length.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::rng_for;

/// Default codebook size.
pub const DEFAULT_CODEBOOK_K: usize = 64;
/// Split perturbation, relative to the per-dimension standard deviation.
const SPLIT_DELTA: f64 = 1e-3;
const MAX_LLOYD_ITERS: usize = 50;
const CONVERGENCE: f64 = 1e-6;
/// Floor for cell weights inside logarithms.
const WEIGHT_FLOOR: f64 = 1e-12;

/// K weighted centroids trained from one feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: Vec<f64>,
    dim: usize,
    pub weights: Vec<f64>,
    pub trained_on: usize,
    pub seed: u64,
}

impl Codebook {
    pub fn new(centroids: Vec<Vec<f64>>, weights: Vec<f64>, trained_on: usize, seed: u64) -> Result<Self> {
        let dim = centroids.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        if centroids.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                left: centroids.len(),
                right: weights.len(),
            });
        }
        if centroids.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidConfig("ragged centroids".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("weights must be >= 0 and sum to 1".into()));
        }
        if centroids.len() > trained_on {
            return Err(Error::InvalidConfig("more centroids than training rows".into()));
        }
        let flat: Vec<f64> = centroids.into_iter().flatten().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("codebook centroid".into()));
        }
        Ok(Self {
            centroids: flat,
            dim,
            weights,
            trained_on,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centroids(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.centroids.chunks_exact(self.dim)
    }

    /// Index and squared distance of the centroid nearest to `x` (lowest index on ties).
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        nearest(&self.centroids, self.dim, x)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Correctly rounded sum of `values` (Shewchuk / `fsum`).
///
/// Because the result is the exact sum rounded once, the sum of a sequence
/// repeated twice is exactly twice the sum of the sequence.
pub(crate) fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }

    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // Round-half-even correction across the remaining partials.
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        let yr = x - hi;
        if y == yr {
            hi = x;
        }
    }
    hi
}

/// Per-stage distortion trace of a codebook training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    /// One entry per LBG stage (after each split), holding the total distortion
    /// measured at every Lloyd assignment step of that stage.
    pub stages: Vec<Vec<f64>>,
}

struct Assignment {
    labels: Vec<usize>,
    counts: Vec<usize>,
    cell_distortion: Vec<f64>,
    total: f64,
}

fn assign(m: &FeatureMatrix, centroids: &[f64], dim: usize) -> Assignment {
    let k = centroids.len() / dim;
    let mut labels = Vec::with_capacity(m.rows());
    let mut counts = vec![0; k];
    let mut cell_distortion = vec![0.0; k];
    let mut per_row = Vec::with_capacity(m.rows());
    for row in m.iter_rows() {
        let (i, d) = nearest(centroids, dim, row);
        labels.push(i);
        counts[i] += 1;
        cell_distortion[i] += d;
        per_row.push(d);
    }
    Assignment {
        labels,
        counts,
        cell_distortion,
        total: exact_sum(per_row),
    }
}

fn split_direction<R: Rng>(rng: &mut R, std: &[f64]) -> Vec<f64> {
    std.iter()
        .map(|s| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * SPLIT_DELTA * s
        })
        .collect()
}

/// Index of the non-empty cell with the largest distortion (lowest index on ties).
fn worst_cell(a: &Assignment) -> usize {
    let mut best = 0;
    for i in 0..a.counts.len() {
        if a.counts[i] > 0
            && (a.counts[best] == 0 || a.cell_distortion[i] > a.cell_distortion[best])
        {
            best = i;
        }
    }
    best
}

fn lloyd<R: Rng>(
    m: &FeatureMatrix,
    centroids: &mut [f64],
    dim: usize,
    std: &[f64],
    rng: &mut R,
    history: &mut Vec<f64>,
) -> Assignment {
    let k = centroids.len() / dim;
    let mut prev = f64::INFINITY;
    let mut a = assign(m, centroids, dim);
    for iter in 0..MAX_LLOYD_ITERS {
        history.push(a.total);
        if a.total == 0.0 || (prev.is_finite() && prev - a.total <= CONVERGENCE * prev) {
            break;
        }
        prev = a.total;

        let mut sums = vec![0.0; k * dim];
        for (row, &l) in m.iter_rows().zip(&a.labels) {
            for (s, v) in sums[l * dim..(l + 1) * dim].iter_mut().zip(row) {
                *s += v;
            }
        }
        let mut empties = Vec::new();
        for c in 0..k {
            if a.counts[c] == 0 {
                empties.push(c);
                continue;
            }
            let n = a.counts[c] as f64;
            for j in 0..dim {
                centroids[c * dim + j] = sums[c * dim + j] / n;
            }
        }
        for c in empties {
            let src = worst_cell(&a);
            let dir = split_direction(rng, std);
            for j in 0..dim {
                centroids[c * dim + j] = centroids[src * dim + j] + dir[j];
            }
            // Do not pick the same cell twice in one round.
            a.cell_distortion[src] /= 2.0;
        }

        a = assign(m, centroids, dim);
        if iter + 1 == MAX_LLOYD_ITERS {
            history.push(a.total);
        }
    }
    a
}

fn distinct_rows(m: &FeatureMatrix) -> (Vec<usize>, Vec<usize>) {
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut firsts = Vec::new();
    let mut counts = Vec::new();
    for (i, row) in m.iter_rows().enumerate() {
        // +0.0 folds -0.0 into 0.0
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        let s = *slot.entry(key).or_insert_with(|| {
            firsts.push(i);
            counts.push(0);
            firsts.len() - 1
        });
        counts[s] += 1;
    }
    (firsts, counts)
}

/// Trains a codebook by LBG binary splitting from the global mean followed by
/// Lloyd iterations at every stage. Effective size is `min(k, distinct rows)`.
pub fn train_codebook(m: &FeatureMatrix, k: usize, seed: u64) -> Result<Codebook> {
    train_codebook_logged(m, k, seed).map(|(c, _)| c)
}

pub fn train_codebook_logged(m: &FeatureMatrix, k: usize, seed: u64) -> Result<(Codebook, TrainingLog)> {
    if m.rows() == 0 || k == 0 {
        return Err(Error::EmptyInput);
    }
    let dim = m.dim();
    let n = m.rows();
    let mut log = TrainingLog::default();

    let (firsts, counts) = distinct_rows(m);
    if firsts.len() <= k {
        let centroids = firsts.iter().map(|&i| m.row(i).to_vec()).collect();
        let weights = counts.iter().map(|&c| c as f64 / n as f64).collect();
        return Ok((Codebook::new(centroids, weights, n, seed)?, log));
    }

    let mut mean = vec![0.0; dim];
    for row in m.iter_rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let mut std = vec![0.0; dim];
    for row in m.iter_rows() {
        for ((acc, v), mu) in std.iter_mut().zip(row).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    std.iter_mut().for_each(|v| *v = (*v / n as f64).sqrt());

    let mut rng = rng_for(seed, &[0x1B6]);
    let mut centroids = mean;
    let mut a = assign(m, &centroids, dim);
    let mut size = 1;
    while size < k {
        let n_split = size.min(k - size);
        let mut order: Vec<usize> = (0..size).collect();
        if n_split < size {
            order.sort_by(|&x, &y| {
                a.cell_distortion[y]
                    .partial_cmp(&a.cell_distortion[x])
                    .unwrap()
                    .then(x.cmp(&y))
            });
            order.truncate(n_split);
            order.sort_unstable();
        }
        for &c in &order {
            let dir = split_direction(&mut rng, &std);
            let base: Vec<f64> = centroids[c * dim..(c + 1) * dim].to_vec();
            for j in 0..dim {
                centroids[c * dim + j] = base[j] + dir[j];
            }
            centroids.extend(base.iter().zip(&dir).map(|(b, d)| b - d));
        }
        size += n_split;

        let mut history = Vec::new();
        a = lloyd(m, &mut centroids, dim, &std, &mut rng, &mut history);
        log.stages.push(history);
    }

    let weights: Vec<f64> = a.counts.iter().map(|&c| c as f64 / n as f64).collect();
    let centroids = centroids.chunks_exact(dim).map(<[f64]>::to_vec).collect();
    Ok((Codebook::new(centroids, weights, n, seed)?, log))
}

/// Average quantization distortion of the rows of `x` against `c`.
pub fn aqd(x: &FeatureMatrix, c: &Codebook) -> Result<f64> {
    if x.rows() == 0 || c.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.dim() != c.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: c.dim(),
        });
    }
    let total = exact_sum(x.iter_rows().map(|r| c.nearest(r).1));
    Ok(total / x.rows() as f64)
}

fn directed_vq(a: &Codebook, b: &Codebook) -> f64 {
    a.centroids()
        .zip(&a.weights)
        .map(|(ca, &wa)| {
            let (j, d2) = b.nearest(ca);
            let wb = b.weights[j].max(WEIGHT_FLOOR);
            wa * (0.5 * d2 + (wa.max(WEIGHT_FLOOR) / wb).ln())
        })
        .sum()
}

/// Symmetric codebook divergence D(a‖b) + D(b‖a). May be slightly negative.
pub fn vq_distance(a: &Codebook, b: &Codebook) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(directed_vq(a, b) + directed_vq(b, a))
}

/// ½[aqd(a, cb(b)) + aqd(b, cb(a))] for already-trained codebooks.
pub fn aqd_distance_with(
    a: &FeatureMatrix,
    a_book: &Codebook,
    b: &FeatureMatrix,
    b_book: &Codebook,
) -> Result<f64> {
    Ok(0.5 * (aqd(a, b_book)? + aqd(b, a_book)?))
}

pub fn aqd_distance(a: &FeatureMatrix, b: &FeatureMatrix, k: usize, seed: u64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let ca = train_codebook(a, k, seed)?;
    let cb = train_codebook(b, k, seed)?;
    aqd_distance_with(a, &ca, b, &cb)
}
