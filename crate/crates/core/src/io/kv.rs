//! Plain-text `key = value` format shared by scenario files, experiment
//! configs and checkpoint manifests.
//!
//! One pair per line; `#` starts a comment; blank lines are ignored; keys
//! may repeat to express lists; tuple values are comma-separated. Entry
//! order is preserved, so writing is deterministic.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use super::IoError;

/// Ordered multimap of string pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: Vec<(String, String)>,
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut entries = Vec::new();
        for (index, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(IoError::Syntax {
                    line: index + 1,
                    content: raw_line.to_string(),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(IoError::Syntax {
                    line: index + 1,
                    content: raw_line.to_string(),
                });
            }
            entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// First value for `key`, if present.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// All values for `key`, in file order.
    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, IoError> {
        self.get(key).ok_or_else(|| IoError::MissingKey(key.to_string()))
    }

    /// First value parsed as `T`; error names the key.
    pub fn require_parsed<T: FromStr>(&self, key: &str) -> Result<T, IoError>
    where
        T::Err: Display,
    {
        parse_value(key, self.require(key)?)
    }

    /// Optional value parsed as `T`; `None` when the key is absent.
    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, IoError>
    where
        T::Err: Display,
    {
        self.get(key).map(|v| parse_value(key, v)).transpose()
    }

    /// Comma-separated tuple of exactly `n` floats.
    pub fn require_floats(&self, key: &str, n: usize) -> Result<Vec<f64>, IoError> {
        parse_floats(key, self.require(key)?, Some(n))
    }

    /// Comma-separated list of floats of any length ≥ 1.
    pub fn require_float_list(&self, key: &str) -> Result<Vec<f64>, IoError> {
        parse_floats(key, self.require(key)?, None)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_text())
            .map_err(|source| IoError::File { path: path.to_path_buf(), source })
    }
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, IoError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| IoError::BadValue {
        key: key.to_string(),
        detail: format!("cannot parse `{value}`: {e}"),
    })
}

pub(crate) fn parse_floats(
    key: &str,
    value: &str,
    expected: Option<usize>,
) -> Result<Vec<f64>, IoError> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|p| parse_value(key, p.trim()))
        .collect::<Result<_, _>>()?;
    if let Some(n) = expected {
        if parts.len() != n {
            return Err(IoError::BadValue {
                key: key.to_string(),
                detail: format!("expected {n} comma-separated values, got {}", parts.len()),
            });
        }
    } else if parts.is_empty() {
        return Err(IoError::BadValue {
            key: key.to_string(),
            detail: "expected at least one value".into(),
        });
    }
    Ok(parts)
}

/// Formats a float with 17 significant digits, enough for a lossless f64
/// round-trip.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Joins floats as a lossless comma-separated tuple.
pub fn format_floats(values: &[f64]) -> String {
    values.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(", ")
}
