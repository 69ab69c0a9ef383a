//! Dataset file codec.
//!
//! Header `uqloc-csi v1, M=<antennas>, N=<records>`, then one record per
//! line: `location_id,x,y,los,f_1,...,f_2M` with floats at 17 significant
//! digits for a lossless round-trip.

use std::path::Path;

use super::kv::format_f64;
use super::IoError;
use crate::scene::CsiSample;

const MAGIC: &str = "uqloc-csi v1";

pub fn write_dataset(path: &Path, samples: &[CsiSample]) -> Result<(), IoError> {
    if samples.is_empty() {
        return Err(IoError::BadHeader("cannot write an empty dataset".into()));
    }
    let feature_len = samples[0].features.len();
    if feature_len == 0 || feature_len % 2 != 0 {
        return Err(IoError::BadHeader(format!(
            "feature length {feature_len} is not twice an antenna count"
        )));
    }
    if let Some(bad) = samples.iter().find(|s| s.features.len() != feature_len) {
        return Err(IoError::BadHeader(format!(
            "inconsistent feature length at location {}: {} vs {}",
            bad.location_id,
            bad.features.len(),
            feature_len
        )));
    }
    let mut out = String::new();
    out.push_str(&format!("{MAGIC}, M={}, N={}\n", feature_len / 2, samples.len()));
    for s in samples {
        out.push_str(&s.location_id.to_string());
        out.push(',');
        out.push_str(&format_f64(s.position[0]));
        out.push(',');
        out.push_str(&format_f64(s.position[1]));
        out.push(',');
        out.push(if s.los { '1' } else { '0' });
        for f in &s.features {
            out.push(',');
            out.push_str(&format_f64(*f));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn read_dataset(path: &Path) -> Result<Vec<CsiSample>, IoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| IoError::BadHeader("empty file".into()))?;
    let (antennas, declared_n) = parse_header(header)?;
    let feature_len = 2 * antennas;

    let mut samples = Vec::with_capacity(declared_n);
    for (index, line) in lines.enumerate() {
        let line_no = index + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 + feature_len {
            return Err(IoError::BadRecord {
                line: line_no,
                detail: format!("expected {} fields, got {}", 4 + feature_len, fields.len()),
            });
        }
        let parse_f = |field: &str, what: &str| -> Result<f64, IoError> {
            field.trim().parse().map_err(|e| IoError::BadRecord {
                line: line_no,
                detail: format!("bad {what} `{field}`: {e}"),
            })
        };
        let location_id = fields[0].trim().parse().map_err(|e| IoError::BadRecord {
            line: line_no,
            detail: format!("bad location_id `{}`: {e}", fields[0]),
        })?;
        let los = match fields[3].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(IoError::BadRecord {
                    line: line_no,
                    detail: format!("bad los flag `{other}`"),
                })
            }
        };
        let mut features = Vec::with_capacity(feature_len);
        for field in &fields[4..] {
            features.push(parse_f(field, "feature")?);
        }
        samples.push(CsiSample {
            features,
            position: [parse_f(fields[1], "x")?, parse_f(fields[2], "y")?],
            los,
            location_id,
        });
    }
    if samples.len() != declared_n {
        return Err(IoError::BadHeader(format!(
            "header declares {declared_n} records, file holds {}",
            samples.len()
        )));
    }
    Ok(samples)
}

fn parse_header(header: &str) -> Result<(usize, usize), IoError> {
    let bad = || IoError::BadHeader(format!("`{header}` (expected `{MAGIC}, M=<int>, N=<int>`)"));
    let mut parts = header.split(", ");
    if parts.next() != Some(MAGIC) {
        return Err(bad());
    }
    let m = parts
        .next()
        .and_then(|p| p.strip_prefix("M="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    let n = parts
        .next()
        .and_then(|p| p.strip_prefix("N="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    if m == 0 || parts.next().is_some() {
        return Err(bad());
    }
    Ok((m, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn toy_samples(n: usize, antennas: usize, seed: u64) -> Vec<CsiSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| CsiSample {
                features: (0..2 * antennas)
                    .map(|_| rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-6..3)))
                    .collect(),
                position: [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)],
                los: rng.random_bool(0.5),
                location_id: i * 7,
            })
            .collect()
    }

    #[test]
    fn round_trip_is_lossless_and_deterministic() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let samples = toy_samples(40, 8, 3);
        write_dataset(&path, &samples).unwrap();
        let first_bytes = std::fs::read(&path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, samples);
        write_dataset(&path, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first_bytes);
    }

    #[test]
    fn header_carries_m_and_n() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset(&path, &toy_samples(5, 4, 1)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("uqloc-csi v1, M=4, N=5\n"), "{text}");
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        for header in [
            "",
            "uqloc-csi v2, M=4, N=5",
            "uqloc-csi v1, M=4",
            "uqloc-csi v1, M=0, N=5",
            "uqloc-csi v1, M=x, N=5",
        ] {
            let dir = tempdir().unwrap();
            let path = dir.path().join("d.csv");
            std::fs::write(&path, format!("{header}\n")).unwrap();
            assert!(
                matches!(read_dataset(&path), Err(IoError::BadHeader(_))),
                "header `{header}` was accepted"
            );
        }
    }

    #[test]
    fn record_count_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset(&path, &toy_samples(5, 2, 2)).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        let trimmed: Vec<&str> = text.lines().take(4).collect();
        text = format!("{}\n", trimmed.join("\n"));
        std::fs::write(&path, text).unwrap();
        assert!(matches!(read_dataset(&path), Err(IoError::BadHeader(_))));
    }

    #[test]
    fn truncated_record_is_rejected_with_line_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "uqloc-csi v1, M=2, N=1\n3,1.0,2.0,1,0.5\n").unwrap();
        match read_dataset(&path) {
            Err(IoError::BadRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_write_is_rejected() {
        let dir = tempdir().unwrap();
        assert!(write_dataset(&dir.path().join("d.csv"), &[]).is_err());
    }
}
