use std::io::ErrorKind;
use std::path::Path;

use hound::{SampleFormat, WavReader};

use crate::error::{Error, Result};

/// Mono audio with samples normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::NonFiniteValue(format!(
                "sample {i} = {} outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn map_hound(err: hound::Error, path: &Path) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() == ErrorKind::NotFound => {
            Error::FileNotFound(path.to_path_buf())
        }
        hound::Error::IoError(e) if e.kind() == ErrorKind::UnexpectedEof => {
            Error::CorruptHeader(format!("truncated file: {e}"))
        }
        hound::Error::IoError(e) => Error::Io(e),
        hound::Error::FormatError(msg) => Error::CorruptHeader(msg.to_string()),
        hound::Error::Unsupported => Error::UnsupportedFormat("non-PCM or unsupported codec".into()),
        hound::Error::InvalidSampleFormat => {
            Error::UnsupportedFormat("invalid sample format for bit depth".into())
        }
        other => Error::CorruptHeader(other.to_string()),
    }
}

/// Reads a PCM WAV file (8/16/24/32-bit integer or 32-bit float) and downmixes to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let reader = WavReader::open(path).map_err(|e| map_hound(e, path))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::CorruptHeader("zero channels".into()));
    }

    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedFormat(format!(
                    "{}-bit float",
                    spec.bits_per_sample
                )));
            }
            reader
                .into_samples::<f32>()
                .map(|s| s.map(|v| (v as f64).clamp(-1.0, 1.0)))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(e, path))?
        }
        SampleFormat::Int => {
            let bits = spec.bits_per_sample;
            if !matches!(bits, 8 | 16 | 24 | 32) {
                return Err(Error::UnsupportedFormat(format!("{bits}-bit integer")));
            }
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(e, path))?
        }
    };

    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };

    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    AudioBuffer::new(samples, spec.sample_rate, source_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hound::{WavSpec, WavWriter};
    use std::io::Write;

    fn spec(channels: u16, bits: u16, fmt: SampleFormat) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: 16_000,
            bits_per_sample: bits,
            sample_format: fmt,
        }
    }

    #[test]
    fn silence_decodes_to_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("silence.wav");
        let mut w = WavWriter::create(&p, spec(1, 16, SampleFormat::Int)).unwrap();
        for _ in 0..16_000 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();

        let a = load_wav(&p).unwrap();
        assert_eq!(a.samples.len(), 16_000);
        assert_eq!(a.sample_rate, 16_000);
        assert!(a.samples.iter().all(|&s| s == 0.0));
        assert_eq!(a.source_id, "silence");
    }

    #[test]
    fn stereo_identical_channels_downmix_to_either_channel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stereo.wav");
        let mut w = WavWriter::create(&p, spec(2, 16, SampleFormat::Int)).unwrap();
        let mono: Vec<i16> = (0..500).map(|i| ((i * 37) % 2000 - 1000) as i16).collect();
        for &s in &mono {
            w.write_sample(s).unwrap();
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();

        let a = load_wav(&p).unwrap();
        assert_eq!(a.samples.len(), mono.len());
        for (got, &want) in a.samples.iter().zip(&mono) {
            assert_eq!(*got, want as f64 / 32768.0);
        }
    }

    #[test]
    fn sine_fixture_matches_generator() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sine.wav");
        let gen = |i: usize| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16_000.0).sin();
        let mut w = WavWriter::create(&p, spec(1, 16, SampleFormat::Int)).unwrap();
        for i in 0..16_000 {
            w.write_sample((gen(i) * 32767.0).round() as i16).unwrap();
        }
        w.finalize().unwrap();

        let a = load_wav(&p).unwrap();
        for (i, s) in a.samples.iter().enumerate() {
            assert!((s - gen(i)).abs() <= 1.0 / 32768.0, "sample {i}");
        }
    }

    #[test]
    fn other_bit_depths_normalize() {
        let dir = tempfile::tempdir().unwrap();

        let p8 = dir.path().join("8.wav");
        let mut w = WavWriter::create(&p8, spec(1, 8, SampleFormat::Int)).unwrap();
        w.write_sample(-128i8).unwrap();
        w.write_sample(64i8).unwrap();
        w.finalize().unwrap();
        assert_eq!(load_wav(&p8).unwrap().samples, vec![-1.0, 0.5]);

        let p24 = dir.path().join("24.wav");
        let mut w = WavWriter::create(&p24, spec(1, 24, SampleFormat::Int)).unwrap();
        w.write_sample(1 << 22).unwrap();
        w.finalize().unwrap();
        assert_eq!(load_wav(&p24).unwrap().samples, vec![0.5]);

        let pf = dir.path().join("f32.wav");
        let mut w = WavWriter::create(&pf, spec(1, 32, SampleFormat::Float)).unwrap();
        w.write_sample(-0.25f32).unwrap();
        w.finalize().unwrap();
        assert_eq!(load_wav(&pf).unwrap().samples, vec![-0.25]);
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_wav("/definitely/not/here.wav"),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn garbage_is_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.wav");
        std::fs::write(&p, b"this is not a riff file at all").unwrap();
        assert!(matches!(load_wav(&p), Err(Error::CorruptHeader(_))));
    }

    #[test]
    fn companded_codec_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("alaw.wav");
        let mut f = std::fs::File::create(&p).unwrap();
        let mut fmt = Vec::new();
        fmt.extend_from_slice(&6u16.to_le_bytes()); // A-law
        fmt.extend_from_slice(&1u16.to_le_bytes());
        fmt.extend_from_slice(&16_000u32.to_le_bytes());
        fmt.extend_from_slice(&16_000u32.to_le_bytes());
        fmt.extend_from_slice(&1u16.to_le_bytes());
        fmt.extend_from_slice(&8u16.to_le_bytes());
        let data = [0u8; 256];
        let riff_len = 4 + (8 + fmt.len()) + (8 + data.len());
        f.write_all(b"RIFF").unwrap();
        f.write_all(&(riff_len as u32).to_le_bytes()).unwrap();
        f.write_all(b"WAVEfmt ").unwrap();
        f.write_all(&(fmt.len() as u32).to_le_bytes()).unwrap();
        f.write_all(&fmt).unwrap();
        f.write_all(b"data").unwrap();
        f.write_all(&(data.len() as u32).to_le_bytes()).unwrap();
        f.write_all(&data).unwrap();
        drop(f);
        let r = load_wav(&p);
        assert!(matches!(r, Err(Error::UnsupportedFormat(_))), "{r:?}");
    }
}
