//! File formats: scenario files, dataset files, checkpoints and manifests.
//!
//! Everything textual uses the `key = value` format from [`kv`]; bulk
//! parameter arrays are little-endian binary f64. All writers are
//! deterministic: identical inputs produce byte-identical files.

pub mod checkpoint;
pub mod dataset_file;
pub mod kv;
pub mod scenario;

pub use checkpoint::{
    load_ensemble, load_model, load_normalization, save_ensemble, save_model, save_normalization,
};
pub use dataset_file::{read_dataset, write_dataset};
pub use kv::KvFile;
pub use scenario::{read_scenario, scenario_to_kv, write_scenario};

use std::path::PathBuf;
use thiserror::Error;

use crate::net::NetError;
use crate::scene::SceneError;
use crate::uncertainty::UncertaintyError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line} is not a `key = value` pair: `{content}`")]
    Syntax { line: usize, content: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("bad value for key `{key}`: {detail}")]
    BadValue { key: String, detail: String },
    #[error("unsupported or corrupt header: {0}")]
    BadHeader(String),
    #[error("malformed record on line {line}: {detail}")]
    BadRecord { line: usize, detail: String },
    #[error("parameter array holds {got} values, manifest declares {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
}
