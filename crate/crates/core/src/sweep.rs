//! Subset sweeps over a single feature file: the real-data counterpart of a
//! simulated surface.

use rand::seq::index::sample;
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::metric::MetricConfig;
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetMode {
    /// Uniformly random rows without replacement.
    Random,
    /// A contiguous span starting at a uniformly random offset.
    Contiguous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub len_a: usize,
    pub len_b: usize,
    pub mean: f64,
    pub trials: usize,
}

fn draw(m: &FeatureMatrix, n: usize, mode: SubsetMode, rng: &mut impl Rng, id: &str) -> Result<FeatureMatrix> {
    let idx: Vec<usize> = match mode {
        SubsetMode::Random => {
            let mut v = sample(rng, m.rows(), n).into_vec();
            v.sort_unstable();
            v
        }
        SubsetMode::Contiguous => {
            let start = rng.random_range(0..=m.rows() - n);
            (start..start + n).collect()
        }
    };
    m.select_rows(id, &idx)
}

/// Mean metric value between independently drawn subsets for every ordered
/// pair of `lengths`. Each unordered pair is simulated once and mirrored.
pub fn subset_sweep(
    features: &FeatureMatrix,
    lengths: &[usize],
    trials: usize,
    seed: u64,
    metric: &MetricConfig,
    mode: SubsetMode,
) -> Result<Vec<SweepRow>> {
    if trials == 0 || lengths.is_empty() {
        return Err(Error::InvalidConfig("need at least one length and one trial".into()));
    }
    if let Some(&n) = lengths.iter().find(|&&n| n > features.rows()) {
        return Err(Error::SubsetTooLarge {
            requested: n,
            available: features.rows(),
        });
    }
    if let Some(&n) = lengths.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidConfig(format!("subset length {n} is below 2")));
    }

    let k = lengths.len();
    let cells: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let means: Vec<(f64, usize)> = cells
        .par_iter()
        .map(|&(i, j)| {
            let mut vals = Vec::with_capacity(trials);
            for t in 0..trials {
                let mut rng = rng_for(seed, &[i as u64, j as u64, t as u64]);
                let a = draw(features, lengths[i], mode, &mut rng, "a")?;
                let b = draw(features, lengths[j], mode, &mut rng, "b")?;
                let book_seed = rng.next_u64();
                let v = metric
                    .prepare_seeded(&a, book_seed)
                    .and_then(|ma| metric.distance(&ma, &metric.prepare_seeded(&b, book_seed)?));
                if let Ok(v) = v {
                    vals.push(v);
                }
            }
            if vals.is_empty() {
                return Err(Error::MetricFailure {
                    len_a: lengths[i],
                    len_b: lengths[j],
                    failed: trials,
                    trials,
                });
            }
            Ok((vals.iter().sum::<f64>() / vals.len() as f64, vals.len()))
        })
        .collect::<Result<_>>()?;

    let mut grid = vec![vec![(0.0, 0); k]; k];
    for (&(i, j), &m) in cells.iter().zip(&means) {
        grid[i][j] = m;
        grid[j][i] = m;
    }
    let mut rows = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            rows.push(SweepRow {
                len_a: lengths[i],
                len_b: lengths[j],
                mean: grid[i][j].0,
                trials: grid[i][j].1,
            });
        }
    }
    Ok(rows)
}
