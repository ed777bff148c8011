use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{AudioBuffer, FeatureMatrix};
use crate::error::{Error, Result};

/// Floor applied to filterbank energies before the log.
const LOG_FLOOR: f64 = 1e-10;

/// Framing and filterbank parameters for MFCC extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub preemphasis: f64,
    pub mel_filters: usize,
    /// Cepstral dimensionality d, including the energy coefficient c0.
    pub num_ceps: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            preemphasis: 0.97,
            mel_filters: 26,
            num_ceps: 13,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.hop_ms > 0.0 && self.hop_ms <= self.frame_ms) {
            return bad("need 0 < hop_ms <= frame_ms");
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return bad("preemphasis must be in [0, 1)");
        }
        if self.num_ceps == 0 || self.num_ceps > self.mel_filters {
            return bad("need 1 <= num_ceps <= mel_filters");
        }
        Ok(())
    }

    pub fn frame_len(&self, sample_rate: u32) -> usize {
        ((self.frame_ms * sample_rate as f64 / 1000.0).round() as usize).max(1)
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        ((self.hop_ms * sample_rate as f64 / 1000.0).round() as usize).max(1)
    }
}

/// Number of full frames that fit in `num_samples`, or `None` if not even one does.
pub fn frame_count(num_samples: usize, frame_len: usize, hop_len: usize) -> Option<usize> {
    (num_samples >= frame_len).then(|| (num_samples - frame_len) / hop_len + 1)
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-style filters spanning 0 Hz to Nyquist, evaluated at FFT bin frequencies.
fn mel_filterbank(num_filters: usize, fft_size: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let bins = fft_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..num_filters + 2)
        .map(|i| mel_to_hz(top * i as f64 / (num_filters + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * sample_rate as f64 / fft_size as f64;

    (0..num_filters)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = bin_hz(k);
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II basis, `num_ceps` rows of length `n`.
fn dct_basis(num_ceps: usize, n: usize) -> Vec<Vec<f64>> {
    (0..num_ceps)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// Extracts an MFCC matrix: pre-emphasis, Hamming window, magnitude spectrum,
/// mel filterbank, log, DCT-II. Column 0 is the energy coefficient.
pub fn extract_mfcc(audio: &AudioBuffer, cfg: &FrameConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let sr = audio.sample_rate;
    let frame_len = cfg.frame_len(sr);
    let hop_len = cfg.hop_len(sr);
    let n_frames = frame_count(audio.samples.len(), frame_len, hop_len).ok_or(
        Error::InputTooShort {
            samples: audio.samples.len(),
            needed: frame_len,
        },
    )?;

    let x = &audio.samples;
    let emphasized: Vec<f64> = (0..x.len())
        .map(|i| {
            if i == 0 {
                x[0]
            } else {
                x[i] - cfg.preemphasis * x[i - 1]
            }
        })
        .collect();

    let fft_size = frame_len.next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let window: Vec<f64> = (0..frame_len)
        .map(|n| {
            if frame_len == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * PI * n as f64 / (frame_len - 1) as f64).cos()
            }
        })
        .collect();
    let filters = mel_filterbank(cfg.mel_filters, fft_size, sr);
    let dct = dct_basis(cfg.num_ceps, cfg.mel_filters);

    let mut out = Vec::with_capacity(n_frames * cfg.num_ceps);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    let mut log_energies = vec![0.0; cfg.mel_filters];
    for f in 0..n_frames {
        let start = f * hop_len;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < frame_len {
                Complex::new(emphasized[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        let mags: Vec<f64> = buf[..fft_size / 2 + 1].iter().map(|c| c.norm()).collect();

        for (e, filt) in log_energies.iter_mut().zip(&filters) {
            let energy: f64 = filt.iter().zip(&mags).map(|(w, m)| w * m).sum();
            *e = energy.max(LOG_FLOOR).ln();
        }
        for basis in &dct {
            out.push(basis.iter().zip(&log_energies).map(|(b, e)| b * e).sum());
        }
    }

    let mut m = FeatureMatrix::new(audio.source_id.clone(), cfg.num_ceps, out)?;
    m.sample_rate = Some(sr);
    m.hop_ms = Some(cfg.hop_ms);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tone(n: usize, sr: u32) -> AudioBuffer {
        let s = (0..n)
            .map(|i| 0.3 * (2.0 * PI * 300.0 * i as f64 / sr as f64).sin() + 0.1 * ((i * 7919 % 101) as f64 / 101.0 - 0.5))
            .collect();
        AudioBuffer::new(s, sr, "tone").unwrap()
    }

    #[test]
    fn one_second_at_16k_gives_98_by_13() {
        let m = extract_mfcc(&tone(16_000, 16_000), &FrameConfig::default()).unwrap();
        assert_eq!((m.rows(), m.dim()), (98, 13));
        assert_eq!(m.sample_rate, Some(16_000));
    }

    #[test]
    fn extraction_is_deterministic() {
        let a = tone(8_000, 16_000);
        let x = extract_mfcc(&a, &FrameConfig::default()).unwrap();
        let y = extract_mfcc(&a, &FrameConfig::default()).unwrap();
        let bits = |m: &FeatureMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x), bits(&y));
    }

    #[test]
    fn too_short_input() {
        let a = AudioBuffer::new(vec![0.0; 100], 16_000, "short").unwrap();
        assert!(matches!(
            extract_mfcc(&a, &FrameConfig::default()),
            Err(Error::InputTooShort { samples: 100, needed: 400 })
        ));
    }

    #[test]
    fn silence_is_finite() {
        let a = AudioBuffer::new(vec![0.0; 4_000], 8_000, "quiet").unwrap();
        let m = extract_mfcc(&a, &FrameConfig::default()).unwrap();
        assert!(m.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn louder_frames_have_larger_c0() {
        let quiet = tone(4_000, 16_000);
        let loud = AudioBuffer::new(quiet.samples.iter().map(|s| s * 2.0).collect(), 16_000, "loud").unwrap();
        let cfg = FrameConfig::default();
        let q = extract_mfcc(&quiet, &cfg).unwrap();
        let l = extract_mfcc(&loud, &cfg).unwrap();
        assert!(l.row(3)[0] > q.row(3)[0]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = FrameConfig::default();
        cfg.hop_ms = 30.0;
        assert!(cfg.validate().is_err());
        let mut cfg = FrameConfig::default();
        cfg.num_ceps = 30;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn filterbank_rows_are_triangles_within_nyquist() {
        let fb = mel_filterbank(26, 512, 16_000);
        assert_eq!(fb.len(), 26);
        for f in &fb {
            assert!(f.iter().all(|&w| (0.0..=1.0).contains(&w)));
            assert!(f.iter().any(|&w| w > 0.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn row_count_formula_holds(
            sr in prop::sample::select(vec![8_000u32, 11_025, 16_000, 22_050]),
            frame_ms in 10.0f64..40.0,
            hop_frac in 0.2f64..1.0,
            extra in 0usize..3_000,
            ceps in 5usize..20,
        ) {
            let cfg = FrameConfig {
                frame_ms,
                hop_ms: frame_ms * hop_frac,
                mel_filters: 26,
                num_ceps: ceps,
                ..FrameConfig::default()
            };
            let frame_len = cfg.frame_len(sr);
            let hop_len = cfg.hop_len(sr);
            let n = frame_len + extra;
            let m = extract_mfcc(&tone(n, sr), &cfg).unwrap();
            prop_assert_eq!(m.rows(), (n - frame_len) / hop_len + 1);
            prop_assert_eq!(m.dim(), ceps);
        }
    }
}
