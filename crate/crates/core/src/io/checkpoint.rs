//! Checkpoint codec: text manifests plus little-endian binary f64
//! parameter arrays.
//!
//! A model checkpoint is a `<name>.manifest` / `<name>.params` pair: the
//! manifest holds the architecture, head settings and parameter count; the
//! params file holds [`ModelParams::to_flat`] output as raw little-endian
//! bytes. An ensemble checkpoint is a `<prefix>.ensemble` manifest listing
//! member checkpoint names plus a shared `.norm` normalization file; all
//! referenced names are relative to the manifest's directory.

use std::path::{Path, PathBuf};

use super::kv::{format_f64, format_floats, KvFile};
use super::IoError;
use crate::dataset::NormalizationState;
use crate::mdn::MdnHead;
use crate::net::{MlpConfig, ModelParams};
use crate::uncertainty::{EnsembleHandle, Model};

const MODEL_MAGIC: &str = "uqloc-checkpoint v1";
const ENSEMBLE_MAGIC: &str = "uqloc-ensemble v1";
const NORM_MAGIC: &str = "uqloc-normalization v1";

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

fn check_magic(kv: &KvFile, expected: &str) -> Result<(), IoError> {
    let format = kv.require("format")?;
    if format != expected {
        return Err(IoError::BadHeader(format!("`{format}` (expected `{expected}`)")));
    }
    Ok(())
}

fn usize_list(kv: &KvFile, key: &str) -> Result<Vec<usize>, IoError> {
    match kv.get(key) {
        None => Ok(Vec::new()),
        Some(value) => value
            .split(',')
            .map(|p| super::kv::parse_value(key, p.trim()))
            .collect(),
    }
}

fn format_usize_list(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

/// Writes `<name>.manifest` and `<name>.params` under `dir`.
pub fn save_model(dir: &Path, name: &str, model: &Model) -> Result<(), IoError> {
    let flat = model.params.to_flat();
    let mut kv = KvFile::new();
    kv.push("format", MODEL_MAGIC);
    kv.push("input_dim", model.config.input_dim);
    if !model.config.hidden_widths.is_empty() {
        kv.push("hidden_widths", format_usize_list(&model.config.hidden_widths));
    }
    kv.push("output_units", model.config.output_units);
    kv.push("dropout_rate", format_f64(model.config.dropout_rate));
    if !model.config.dropout_layers.is_empty() {
        kv.push("dropout_layers", format_usize_list(&model.config.dropout_layers));
    }
    kv.push("init_std", format_f64(model.config.init_std));
    kv.push("seed", model.config.seed);
    kv.push("mixtures", model.head.mixtures);
    kv.push("variance_floor", format_f64(model.head.variance_floor));
    kv.push("param_count", flat.len());
    kv.push("params_file", format!("{name}.params"));
    kv.write(&dir.join(format!("{name}.manifest")))?;

    let mut bytes = Vec::with_capacity(flat.len() * 8);
    for v in &flat {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_file(&dir.join(format!("{name}.params")), &bytes)
}

/// Loads a `<name>.manifest` / `<name>.params` pair from `dir`.
pub fn load_model(dir: &Path, name: &str) -> Result<Model, IoError> {
    let kv = KvFile::read(&dir.join(format!("{name}.manifest")))?;
    check_magic(&kv, MODEL_MAGIC)?;
    let config = MlpConfig {
        input_dim: kv.require_parsed("input_dim")?,
        hidden_widths: usize_list(&kv, "hidden_widths")?,
        output_units: kv.require_parsed("output_units")?,
        dropout_rate: kv.require_parsed("dropout_rate")?,
        dropout_layers: usize_list(&kv, "dropout_layers")?,
        init_std: kv.require_parsed("init_std")?,
        seed: kv.require_parsed("seed")?,
    };
    config.validate()?;
    let head = MdnHead {
        mixtures: kv.require_parsed("mixtures")?,
        variance_floor: kv.require_parsed("variance_floor")?,
    };
    let expected: usize = kv.require_parsed("param_count")?;
    let params_path = dir.join(kv.require("params_file")?);
    let bytes = std::fs::read(&params_path)
        .map_err(|source| IoError::File { path: params_path.clone(), source })?;
    if bytes.len() % 8 != 0 || bytes.len() / 8 != expected {
        return Err(IoError::ParamCount { expected, got: bytes.len() / 8 });
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let params = ModelParams::from_flat(&config, &flat)?;
    Ok(Model { config, params, head })
}

pub fn save_normalization(path: &Path, norm: &NormalizationState) -> Result<(), IoError> {
    let mut kv = KvFile::new();
    kv.push("format", NORM_MAGIC);
    kv.push("delta_norm", format_f64(norm.delta_norm));
    kv.push("target_min", format_floats(&norm.target_min));
    kv.push("target_max", format_floats(&norm.target_max));
    kv.write(path)
}

pub fn load_normalization(path: &Path) -> Result<NormalizationState, IoError> {
    let kv = KvFile::read(path)?;
    check_magic(&kv, NORM_MAGIC)?;
    let min = kv.require_floats("target_min", 2)?;
    let max = kv.require_floats("target_max", 2)?;
    let norm = NormalizationState {
        delta_norm: kv.require_parsed("delta_norm")?,
        target_min: [min[0], min[1]],
        target_max: [max[0], max[1]],
    };
    if !(norm.delta_norm > 0.0) {
        return Err(IoError::BadValue {
            key: "delta_norm".into(),
            detail: format!("must be positive, got {}", norm.delta_norm),
        });
    }
    Ok(norm)
}

fn member_name(prefix: &str, index: usize) -> String {
    format!("{prefix}-member-{index:03}")
}

/// Writes `<prefix>.ensemble`, `<prefix>.norm` and one model checkpoint per
/// member under `dir`.
pub fn save_ensemble(dir: &Path, prefix: &str, handle: &EnsembleHandle) -> Result<(), IoError> {
    let norm_file = format!("{prefix}.norm");
    save_normalization(&dir.join(&norm_file), &handle.normalization)?;
    let mut kv = KvFile::new();
    kv.push("format", ENSEMBLE_MAGIC);
    kv.push("members", handle.members.len());
    kv.push("normalization_file", &norm_file);
    for (index, params) in handle.members.iter().enumerate() {
        let name = member_name(prefix, index);
        let model = Model {
            config: handle.config.clone(),
            params: params.clone(),
            head: handle.head,
        };
        save_model(dir, &name, &model)?;
        kv.push("member", name);
    }
    kv.write(&dir.join(format!("{prefix}.ensemble")))
}

/// Loads an ensemble manifest and all member checkpoints it lists.
pub fn load_ensemble(dir: &Path, prefix: &str) -> Result<EnsembleHandle, IoError> {
    let manifest: PathBuf = dir.join(format!("{prefix}.ensemble"));
    let kv = KvFile::read(&manifest)?;
    check_magic(&kv, ENSEMBLE_MAGIC)?;
    let declared: usize = kv.require_parsed("members")?;
    let norm = load_normalization(&dir.join(kv.require("normalization_file")?))?;
    let member_names = kv.get_all("member");
    if member_names.len() != declared {
        return Err(IoError::BadHeader(format!(
            "manifest declares {declared} members but lists {}",
            member_names.len()
        )));
    }
    let mut config = None;
    let mut head = None;
    let mut members = Vec::with_capacity(declared);
    for (index, name) in member_names.iter().enumerate() {
        let model = load_model(dir, name)?;
        match &config {
            None => {
                config = Some(model.config);
                head = Some(model.head);
            }
            Some(existing) => {
                if *existing != model.config {
                    return Err(IoError::BadHeader(format!(
                        "member {index} architecture differs from member 0"
                    )));
                }
            }
        }
        members.push(model.params);
    }
    let config = config.ok_or_else(|| IoError::BadHeader("ensemble lists no members".into()))?;
    Ok(EnsembleHandle::new(config, head.expect("set with config"), members, norm)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_params;
    use tempfile::tempdir;

    fn toy_model(seed: u64) -> Model {
        let config = MlpConfig {
            input_dim: 6,
            hidden_widths: vec![8, 4],
            output_units: 15,
            dropout_rate: 0.1,
            dropout_layers: vec![1, 2],
            init_std: 0.1,
            seed,
        };
        let params = init_params(&config).unwrap();
        Model { config, params, head: MdnHead::new(3) }
    }

    fn toy_norm() -> NormalizationState {
        NormalizationState {
            delta_norm: 0.0123456789012345678,
            target_min: [5.0, -15.0],
            target_max: [34.5, 14.5],
        }
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let model = toy_model(77);
        save_model(dir.path(), "mcd", &model).unwrap();
        let back = load_model(dir.path(), "mcd").unwrap();
        assert_eq!(back.config, model.config);
        assert_eq!(back.head, model.head);
        assert_eq!(back.params, model.params);
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let dir = tempdir().unwrap();
        let model = toy_model(3);
        save_model(dir.path(), "a", &model).unwrap();
        let manifest = std::fs::read(dir.path().join("a.manifest")).unwrap();
        let params = std::fs::read(dir.path().join("a.params")).unwrap();
        save_model(dir.path(), "a", &model).unwrap();
        assert_eq!(std::fs::read(dir.path().join("a.manifest")).unwrap(), manifest);
        assert_eq!(std::fs::read(dir.path().join("a.params")).unwrap(), params);
    }

    #[test]
    fn truncated_params_are_rejected() {
        let dir = tempdir().unwrap();
        let model = toy_model(5);
        save_model(dir.path(), "m", &model).unwrap();
        let path = dir.path().join("m.params");
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(
            load_model(dir.path(), "m"),
            Err(IoError::ParamCount { .. })
        ));
    }

    #[test]
    fn normalization_round_trips_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("n.norm");
        let norm = toy_norm();
        save_normalization(&path, &norm).unwrap();
        assert_eq!(load_normalization(&path).unwrap(), norm);
    }

    #[test]
    fn ensemble_round_trip_preserves_members_in_order() {
        let dir = tempdir().unwrap();
        let base = toy_model(10);
        let mut config = base.config.clone();
        config.dropout_rate = 0.0;
        config.dropout_layers.clear();
        let members: Vec<ModelParams> = (0..3)
            .map(|i| {
                let mut c = config.clone();
                c.seed = 100 + i;
                init_params(&c).unwrap()
            })
            .collect();
        let handle =
            EnsembleHandle::new(config, base.head, members.clone(), toy_norm()).unwrap();
        save_ensemble(dir.path(), "den", &handle).unwrap();
        let back = load_ensemble(dir.path(), "den").unwrap();
        assert_eq!(back.members, members);
        assert_eq!(back.config, handle.config);
        assert_eq!(back.normalization, handle.normalization);
    }

    #[test]
    fn missing_member_file_is_reported() {
        let dir = tempdir().unwrap();
        let base = toy_model(20);
        let mut config = base.config.clone();
        config.dropout_rate = 0.0;
        config.dropout_layers.clear();
        let handle = EnsembleHandle::new(
            config.clone(),
            base.head,
            vec![init_params(&config).unwrap()],
            toy_norm(),
        )
        .unwrap();
        save_ensemble(dir.path(), "den", &handle).unwrap();
        std::fs::remove_file(dir.path().join("den-member-000.params")).unwrap();
        assert!(matches!(load_ensemble(dir.path(), "den"), Err(IoError::File { .. })));
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let model = toy_model(30);
        save_model(dir.path(), "m", &model).unwrap();
        let path = dir.path().join("m.manifest");
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace(MODEL_MAGIC, "uqloc-checkpoint v9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_model(dir.path(), "m"), Err(IoError::BadHeader(_))));
    }
}
