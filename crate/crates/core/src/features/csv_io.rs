use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Writes `m` as a feature CSV: `#key=value` metadata lines, then one row per frame.
///
/// Values are written in shortest round-trip form, so a read returns them bit-exact.
pub fn write_features(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render(m))?;
    Ok(())
}

fn render(m: &FeatureMatrix) -> String {
    let mut s = String::with_capacity(m.rows() * m.dim() * 20);
    let _ = writeln!(s, "# segment_id={}", m.segment_id());
    let _ = writeln!(s, "# dim={}", m.dim());
    if let Some(sr) = m.sample_rate {
        let _ = writeln!(s, "# sample_rate={sr}");
    }
    if let Some(h) = m.hop_ms {
        let _ = writeln!(s, "# hop_ms={h}");
    }
    for row in m.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:?}");
        }
        s.push('\n');
    }
    s
}

/// Reads a feature CSV. The dimension is taken from the first data row; the
/// segment id defaults to the file stem when no metadata names it.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse(&text, &stem)
}

fn parse(text: &str, default_id: &str) -> Result<FeatureMatrix> {
    let mut segment_id = default_id.to_string();
    let mut declared_dim: Option<usize> = None;
    let mut sample_rate = None;
    let mut hop_ms = None;
    let mut dim: Option<usize> = None;
    let mut data = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                let (k, v) = (k.trim(), v.trim());
                match k {
                    "segment_id" => segment_id = v.to_string(),
                    "dim" => declared_dim = v.parse().ok(),
                    "sample_rate" => sample_rate = v.parse().ok(),
                    "hop_ms" => hop_ms = v.parse().ok(),
                    _ => {}
                }
            }
            continue;
        }

        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::MalformedRow {
                line: line_no,
                reason: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(format!("line {line_no}: {field}")));
            }
            data.push(v);
        }
        let width = data.len() - before;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::MalformedRow {
                    line: line_no,
                    reason: format!("expected {d} fields, found {width}"),
                })
            }
            _ => {}
        }
    }

    let dim = dim.ok_or(Error::EmptyInput)?;
    if let Some(d) = declared_dim {
        if d != dim {
            return Err(Error::MalformedRow {
                line: 0,
                reason: format!("metadata declares dim={d} but rows have {dim} fields"),
            });
        }
    }
    let mut m = FeatureMatrix::new(segment_id, dim, data)?;
    m.sample_rate = sample_rate;
    m.hop_ms = hop_ms;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_98_by_13() {
        let data: Vec<f64> = (0..98 * 13).map(|i| (i as f64 * 0.37).sin() * 1e3 / 7.0).collect();
        let mut m = FeatureMatrix::new("seg-1", 13, data).unwrap();
        m.sample_rate = Some(16_000);
        m.hop_ms = Some(10.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_features(&m, &p).unwrap();
        let back = read_features(&p).unwrap();
        assert_eq!((back.rows(), back.dim()), (98, 13));
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert_eq!(back.segment_id(), "seg-1");
        assert_eq!(back.sample_rate, Some(16_000));
        assert_eq!(back.hop_ms, Some(10.0));
    }

    #[test]
    fn single_zero_row() {
        let m = parse("0,0,0,0,0,0,0,0,0,0,0,0,0\n", "z").unwrap();
        assert_eq!((m.rows(), m.dim()), (1, 13));
        assert!(m.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(m.segment_id(), "z");
    }

    #[test]
    fn ragged_rows_rejected() {
        let text = format!("{}\n{}\n", vec!["1"; 13].join(","), vec!["1"; 12].join(","));
        assert!(matches!(
            parse(&text, "r"),
            Err(Error::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(parse("1,NaN\n", "n"), Err(Error::NonFiniteValue(_))));
        assert!(matches!(parse("1,inf\n", "n"), Err(Error::NonFiniteValue(_))));
    }

    #[test]
    fn comments_only_is_empty() {
        assert!(matches!(parse("# dim=13\n", "e"), Err(Error::EmptyInput)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn render_parse_preserves_shape_and_values(
            rows in 1usize..20,
            dim in 1usize..16,
            seed in any::<u64>(),
        ) {
            let data: Vec<f64> = (0..rows * dim)
                .map(|i| ((seed.wrapping_add(i as u64) % 10_007) as f64 - 5_000.0) / 3.3e-2)
                .collect();
            let m = FeatureMatrix::new("p", dim, data).unwrap();
            let back = parse(&render(&m), "x").unwrap();
            prop_assert_eq!((back.rows(), back.dim()), (rows, dim));
            prop_assert_eq!(back.as_slice(), m.as_slice());
        }
    }
}
