//! Seeded fixtures shared by the benchmarks in `benches/`.

use kl2clust::calibration::{simulate_surface, SimulationConfig};
use kl2clust::rng::{rng_for, GaussianSource};
use kl2clust::{AudioBuffer, CorrectionSurface, FeatureMatrix, MetricKind};

/// `n` rows from N(0, I_dim).
pub fn gaussian_features(seed: u64, n: usize, dim: usize) -> FeatureMatrix {
    GaussianSource::standard(dim).sample(&mut rng_for(seed, &[]), n, "bench")
}

/// `secs` seconds of a two-tone signal at 16 kHz.
pub fn tone(secs: f64) -> AudioBuffer {
    let sr = 16_000u32;
    let samples = (0..(secs * sr as f64) as usize)
        .map(|i| {
            let t = i as f64 / sr as f64;
            0.3 * (2.0 * std::f64::consts::PI * 220.0 * t).sin() + 0.1 * (2.0 * std::f64::consts::PI * 1800.0 * t).sin()
        })
        .collect();
    AudioBuffer::new(samples, sr, "tone").expect("samples are in range")
}

/// A coarse KL2 surface for correction benchmarks.
pub fn small_surface() -> CorrectionSurface {
    let mut cfg = SimulationConfig::new(MetricKind::Kl2);
    cfg.trials_per_cell = 10;
    simulate_surface(&cfg).expect("valid config").surface
}
