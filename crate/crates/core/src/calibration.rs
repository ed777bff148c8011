//! Length-bias calibration surfaces.
//!
//! A [`CorrectionSurface`] holds, for every pair of grid lengths (n, m), the
//! mean distance between two independent samples of those lengths drawn from
//! one Gaussian. Dividing an observed distance by the surface value at the two
//! segment lengths gives a length-corrected distance whose same-source
//! expectation is 1 everywhere on the grid.
//!
//! Trial `t` of cell `(i, j)` draws from a ChaCha8 stream keyed by
//! `mix_seed(seed, [i, j, t])` (see [`crate::rng::mix_seed`]), so a surface
//! depends only on its configuration and never on how cells are scheduled.

use std::fs;
use std::path::Path;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::metric::{MetricConfig, MetricKind};
use crate::rng::{rng_for, GaussianSource};
use crate::vq::DEFAULT_CODEBOOK_K;

pub const DEFAULT_GRID: [usize; 10] = [20, 30, 50, 75, 100, 150, 200, 300, 500, 1000];
pub const FORMAT_VERSION: u32 = 1;
/// A cell fails when more than this fraction of its trials error.
const MAX_FAILED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub metric: MetricKind,
    pub dim: usize,
    pub grid_lengths: Vec<usize>,
    pub trials_per_cell: usize,
    pub seed: u64,
    pub codebook_k: usize,
}

impl SimulationConfig {
    pub fn new(metric: MetricKind) -> Self {
        Self {
            metric,
            dim: 13,
            grid_lengths: DEFAULT_GRID.to_vec(),
            trials_per_cell: 200,
            seed: 0,
            codebook_k: DEFAULT_CODEBOOK_K,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if self.grid_lengths.is_empty() {
            return bad("grid_lengths is empty".into());
        }
        if self.grid_lengths.windows(2).any(|w| w[0] >= w[1]) {
            return bad("grid_lengths must be strictly increasing".into());
        }
        let floor = if self.metric.is_kl2_family() { self.dim + 2 } else { 1 };
        if let Some(&g) = self.grid_lengths.iter().find(|&&g| g <= floor) {
            return bad(format!("grid length {g} must exceed {floor}"));
        }
        if self.trials_per_cell == 0 {
            return bad("trials_per_cell must be >= 1".into());
        }
        if self.metric.uses_codebooks() && self.codebook_k == 0 {
            return bad("codebook_k must be >= 1".into());
        }
        Ok(())
    }
}

/// Simulated mean distance between same-distribution samples, per length pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSurface {
    pub metric_id: MetricKind,
    pub dim: usize,
    pub grid_lengths: Vec<usize>,
    /// `values[i][j]` is the mean distance at lengths `(grid[i], grid[j])`.
    pub values: Vec<Vec<f64>>,
    pub trials_per_cell: usize,
    pub seed: u64,
    pub codebook_k: Option<usize>,
    pub created_at: String,
}

/// A simulated surface plus per-cell diagnostics that are not persisted.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub surface: CorrectionSurface,
    /// Standard error of each cell mean.
    pub std_errors: Vec<Vec<f64>>,
    /// Mean covariance term C per cell (KL2 family only).
    pub covariance_means: Option<Vec<Vec<f64>>>,
    /// Trials whose segment statistics needed a ridge.
    pub regularized_segments: usize,
    pub failed_trials: usize,
}

/// Progress notification for one finished cell.
#[derive(Debug, Clone, Copy)]
pub struct CellDone {
    pub len_a: usize,
    pub len_b: usize,
    pub mean: f64,
    pub std_error: f64,
}

struct CellResult {
    i: usize,
    j: usize,
    mean: f64,
    std_error: f64,
    covariance_mean: f64,
    regularized: usize,
    failed: usize,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn simulate_cell(
    cfg: &SimulationConfig,
    metric: &MetricConfig,
    source: &GaussianSource,
    i: usize,
    j: usize,
) -> Result<CellResult> {
    let (na, nb) = (cfg.grid_lengths[i], cfg.grid_lengths[j]);
    let mut values = Vec::with_capacity(cfg.trials_per_cell);
    let mut cov_terms = Vec::new();
    let mut regularized = 0;
    let mut failed = 0;
    for t in 0..cfg.trials_per_cell {
        let mut rng = rng_for(cfg.seed, &[i as u64, j as u64, t as u64]);
        let a = source.sample(&mut rng, na, "a");
        let b = source.sample(&mut rng, nb, "b");
        let book_seed = rng.next_u64();
        let outcome = metric
            .prepare_seeded(&a, book_seed)
            .and_then(|ma| Ok((ma, metric.prepare_seeded(&b, book_seed)?)))
            .and_then(|(ma, mb)| {
                regularized += ma.was_regularized() as usize + mb.was_regularized() as usize;
                metric.evaluate(&ma, &mb)
            });
        match outcome {
            Ok(e) => {
                values.push(e.value);
                if let Some(p) = e.parts {
                    cov_terms.push(p.covariance);
                }
            }
            Err(_) => failed += 1,
        }
    }
    if values.is_empty() || failed as f64 > MAX_FAILED_FRACTION * cfg.trials_per_cell as f64 {
        return Err(Error::MetricFailure {
            len_a: na,
            len_b: nb,
            failed,
            trials: cfg.trials_per_cell,
        });
    }
    let (mean, std_error) = mean_and_se(&values);
    let covariance_mean = if cov_terms.is_empty() {
        f64::NAN
    } else {
        cov_terms.iter().sum::<f64>() / cov_terms.len() as f64
    };
    Ok(CellResult {
        i,
        j,
        mean,
        std_error,
        covariance_mean,
        regularized,
        failed,
    })
}

/// Simulates a surface from N(0, I_dim).
pub fn simulate_surface(cfg: &SimulationConfig) -> Result<SimulationReport> {
    simulate_surface_with(cfg, &GaussianSource::standard(cfg.dim), None)
}

/// Simulates a surface from an arbitrary Gaussian source. Cells run on the
/// current rayon pool; `progress` is called once per finished cell.
pub fn simulate_surface_with(
    cfg: &SimulationConfig,
    source: &GaussianSource,
    progress: Option<&(dyn Fn(CellDone) + Sync)>,
) -> Result<SimulationReport> {
    cfg.validate()?;
    if source.dim() != cfg.dim {
        return Err(Error::DimensionMismatch {
            left: cfg.dim,
            right: source.dim(),
        });
    }
    let metric = MetricConfig::new(cfg.metric).with_codebook(cfg.codebook_k, cfg.seed);
    let g = cfg.grid_lengths.len();
    let cells: Vec<(usize, usize)> = (0..g).flat_map(|i| (i..g).map(move |j| (i, j))).collect();

    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|&(i, j)| {
            let r = simulate_cell(cfg, &metric, source, i, j)?;
            if let Some(cb) = progress {
                cb(CellDone {
                    len_a: cfg.grid_lengths[i],
                    len_b: cfg.grid_lengths[j],
                    mean: r.mean,
                    std_error: r.std_error,
                });
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let mut values = vec![vec![0.0; g]; g];
    let mut std_errors = vec![vec![0.0; g]; g];
    let mut cov = vec![vec![0.0; g]; g];
    let (mut regularized_segments, mut failed_trials) = (0, 0);
    for r in &results {
        if !(r.mean > 0.0 && r.mean.is_finite()) {
            return Err(Error::DegenerateSurface(r.mean));
        }
        for (x, y) in [(r.i, r.j), (r.j, r.i)] {
            values[x][y] = r.mean;
            std_errors[x][y] = r.std_error;
            cov[x][y] = r.covariance_mean;
        }
        regularized_segments += r.regularized;
        failed_trials += r.failed;
    }

    Ok(SimulationReport {
        surface: CorrectionSurface {
            metric_id: cfg.metric,
            dim: cfg.dim,
            grid_lengths: cfg.grid_lengths.clone(),
            values,
            trials_per_cell: cfg.trials_per_cell,
            seed: cfg.seed,
            codebook_k: cfg.metric.uses_codebooks().then_some(cfg.codebook_k),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        },
        std_errors,
        covariance_means: cfg.metric.is_kl2_family().then_some(cov),
        regularized_segments,
        failed_trials,
    })
}

/// Position of `x` on the log-length axis of `grid`: bracketing index and weight.
fn locate(grid: &[usize], x: f64) -> (usize, f64) {
    let last = grid.len() - 1;
    if last == 0 {
        return (0, 0.0);
    }
    let lx = x.ln();
    let lo = (grid[0] as f64).ln();
    let hi = (grid[last] as f64).ln();
    if lx <= lo {
        return (0, 0.0);
    }
    if lx >= hi {
        return (last - 1, 1.0);
    }
    let i = grid.partition_point(|&g| (g as f64).ln() <= lx) - 1;
    let i = i.min(last - 1);
    let (a, b) = ((grid[i] as f64).ln(), (grid[i + 1] as f64).ln());
    (i, (lx - a) / (b - a))
}

impl CorrectionSurface {
    /// Bilinear interpolation in (log n, log m), clamped to the grid edges.
    pub fn lookup(&self, n: usize, m: usize) -> f64 {
        self.lookup_f64(n as f64, m as f64)
    }

    pub fn lookup_f64(&self, n: f64, m: f64) -> f64 {
        // Canonical argument order makes the result exactly symmetric.
        let (n, m) = if n <= m { (n, m) } else { (m, n) };
        let (i, s) = locate(&self.grid_lengths, n);
        let (j, t) = locate(&self.grid_lengths, m);
        let v = &self.values;
        let at = |r: usize, c: usize| {
            v[r.min(v.len() - 1)][c.min(v.len() - 1)]
        };
        (1.0 - s) * (1.0 - t) * at(i, j)
            + s * (1.0 - t) * at(i + 1, j)
            + (1.0 - s) * t * at(i, j + 1)
            + s * t * at(i + 1, j + 1)
    }

    pub fn descriptor(&self) -> String {
        format!(
            "{}(d={},grid={}..{},trials={},seed={})",
            self.metric_id,
            self.dim,
            self.grid_lengths.first().copied().unwrap_or(0),
            self.grid_lengths.last().copied().unwrap_or(0),
            self.trials_per_cell,
            self.seed
        )
    }
}

pub fn lookup(s: &CorrectionSurface, n: usize, m: usize) -> f64 {
    s.lookup(n, m)
}

/// raw / surface(n, m).
pub fn corrected_distance(raw: f64, s: &CorrectionSurface, n: usize, m: usize) -> Result<f64> {
    let denom = s.lookup(n, m);
    if !(denom > 0.0) {
        return Err(Error::DegenerateSurface(denom));
    }
    Ok(raw / denom)
}

#[derive(Serialize, Deserialize)]
struct SurfaceFile {
    format_version: u32,
    metric_id: MetricKind,
    dim: usize,
    grid_lengths: Vec<usize>,
    trials_per_cell: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    codebook_k: Option<usize>,
    created_at: String,
    values: Vec<Vec<f64>>,
}

const REQUIRED_FIELDS: [&str; 8] = [
    "format_version",
    "metric_id",
    "dim",
    "grid_lengths",
    "trials_per_cell",
    "seed",
    "created_at",
    "values",
];

/// Serializes a surface as a JSON document.
pub fn surface_to_string(s: &CorrectionSurface) -> String {
    let file = SurfaceFile {
        format_version: FORMAT_VERSION,
        metric_id: s.metric_id,
        dim: s.dim,
        grid_lengths: s.grid_lengths.clone(),
        trials_per_cell: s.trials_per_cell,
        seed: s.seed,
        codebook_k: s.codebook_k,
        created_at: s.created_at.clone(),
        values: s.values.clone(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("surface serializes");
    out.push('\n');
    out
}

pub fn save_surface(s: &CorrectionSurface, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, surface_to_string(s))?;
    Ok(())
}

pub fn surface_from_str(text: &str) -> Result<CorrectionSurface> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::CorruptFile(format!("not valid JSON: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::SchemaMismatch("top level is not an object".into()))?;
    if let Some(missing) = REQUIRED_FIELDS.iter().find(|f| !obj.contains_key(**f)) {
        return Err(Error::SchemaMismatch(format!("missing field {missing}")));
    }
    let file: SurfaceFile =
        serde_json::from_value(doc).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "unsupported format_version {}",
            file.format_version
        )));
    }
    let g = file.grid_lengths.len();
    if g == 0 || file.values.len() != g || file.values.iter().any(|r| r.len() != g) {
        return Err(Error::SchemaMismatch(format!(
            "values must be a {g}x{g} matrix"
        )));
    }
    if file.grid_lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::CorruptFile("grid_lengths not strictly increasing".into()));
    }
    for (i, row) in file.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::CorruptFile(format!("values[{i}][{j}] = {v} is not positive")));
            }
            let w = file.values[j][i];
            if (v - w).abs() > 1e-9 * v.abs().max(1.0) {
                return Err(Error::CorruptFile(format!("values not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(CorrectionSurface {
        metric_id: file.metric_id,
        dim: file.dim,
        grid_lengths: file.grid_lengths,
        values: file.values,
        trials_per_cell: file.trials_per_cell,
        seed: file.seed,
        codebook_k: file.codebook_k,
        created_at: file.created_at,
    })
}

pub fn load_surface(path: impl AsRef<Path>) -> Result<CorrectionSurface> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    surface_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> CorrectionSurface {
        CorrectionSurface {
            metric_id: MetricKind::Kl2,
            dim: 2,
            grid_lengths: vec![25, 100, 400],
            values: vec![
                vec![9.0, 5.0, 4.0],
                vec![5.0, 2.0, 1.5],
                vec![4.0, 1.5, 1.0],
            ],
            trials_per_cell: 10,
            seed: 3,
            codebook_k: None,
            created_at: "2026-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn knots_return_stored_values() {
        let s = toy();
        for (i, &n) in s.grid_lengths.iter().enumerate() {
            for (j, &m) in s.grid_lengths.iter().enumerate() {
                assert_eq!(s.lookup(n, m), s.values[i][j]);
            }
        }
    }

    #[test]
    fn clamps_outside_grid() {
        let s = toy();
        assert_eq!(s.lookup(2, 100), s.lookup(25, 100));
        assert_eq!(s.lookup(5000, 100), s.lookup(400, 100));
        assert_eq!(s.lookup(3, 9000), 4.0);
    }

    #[test]
    fn geometric_midpoint_averages_bracketing_cells() {
        let s = toy();
        // 50 = sqrt(25 * 100)
        assert!((s.lookup(50, 100) - (5.0 + 2.0) / 2.0).abs() < 1e-12);
        assert!((s.lookup(200, 25) - (5.0 + 4.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn lookup_is_symmetric() {
        let s = toy();
        for n in [2, 17, 33, 71, 150, 399, 1000] {
            for m in [3, 40, 99, 250, 401] {
                assert_eq!(s.lookup(n, m), s.lookup(m, n));
            }
        }
    }

    #[test]
    fn corrected_distance_divides() {
        let s = toy();
        assert_eq!(corrected_distance(s.lookup(60, 300), &s, 60, 300).unwrap(), 1.0);
        let mut bad = toy();
        bad.values[0][0] = 0.0;
        assert!(matches!(
            corrected_distance(1.0, &bad, 25, 25),
            Err(Error::DegenerateSurface(_))
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let mut s = toy();
        s.values[0][1] = 1.0 / 3.0;
        s.values[1][0] = 1.0 / 3.0;
        let back = surface_from_str(&surface_to_string(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn schema_and_corruption_errors() {
        let text = surface_to_string(&toy());
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().remove("grid_lengths");
        assert!(matches!(
            surface_from_str(&v.to_string()),
            Err(Error::SchemaMismatch(_))
        ));

        let mut bad = toy();
        bad.values[2][2] = -1.0;
        assert!(matches!(
            surface_from_str(&surface_to_string(&bad)),
            Err(Error::CorruptFile(_))
        ));

        assert!(matches!(surface_from_str("{ nope"), Err(Error::CorruptFile(_))));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["format_version"] = 2.into();
        assert!(matches!(
            surface_from_str(&v.to_string()),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = SimulationConfig::new(MetricKind::Kl2);
        assert!(c.validate().is_ok());
        c.grid_lengths = vec![15, 30];
        assert!(c.validate().is_err());
        c.grid_lengths = vec![30, 30];
        assert!(c.validate().is_err());
        let mut c = SimulationConfig::new(MetricKind::Aqd);
        c.grid_lengths = vec![5, 10];
        assert!(c.validate().is_ok());
        c.trials_per_cell = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn small_simulation_is_symmetric_positive_and_deterministic() {
        let mut c = SimulationConfig::new(MetricKind::Kl2);
        c.dim = 3;
        c.grid_lengths = vec![8, 20, 60];
        c.trials_per_cell = 20;
        c.seed = 5;
        let a = simulate_surface(&c).unwrap();
        let b = simulate_surface(&c).unwrap();
        assert_eq!(a.surface.values, b.surface.values);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.surface.values[i][j], a.surface.values[j][i]);
                assert!(a.surface.values[i][j] > 0.0);
            }
        }
        assert!(a.surface.values[0][0] > a.surface.values[2][2]);
        assert!(a.covariance_means.is_some());
    }
}
