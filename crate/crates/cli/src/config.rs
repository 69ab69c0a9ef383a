//! Experiment configuration: one `key = value` file fully describes a run.
//!
//! Relative paths inside the file resolve against the config file's
//! directory. Schedule settings (`max_epochs`, `patience`, `clip_value`)
//! default per method — MC-dropout trains long with patience 80 and no
//! clipping, ensembles train 300 epochs with patience 30 and clip 1.0 —
//! and any key can override the default.
//!
//! All randomness descends from one master seed via labeled derivations:
//! `split` (shuffle), `init` (MCD weight init), `train` (epoch shuffles and
//! batch dropout masks), `ensemble` (member seed base) and `mcd-eval`
//! (inference-time dropout masks).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use uqloc_core::dataset::Rect;
use uqloc_core::io::KvFile;
use uqloc_core::mdn::{MdnHead, DEFAULT_VARIANCE_FLOOR};
use uqloc_core::seed::derive_seed;
use uqloc_core::{Method, MlpConfig, SplitSpec, TrainConfig};

/// Parsed, path-resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scene_file: PathBuf,
    /// Optional pregenerated dataset; when absent the scene is synthesized
    /// in memory.
    pub dataset_file: Option<PathBuf>,
    pub method: Method,
    pub s_values: Vec<usize>,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub split: SplitFractions,
    pub out_of_set_region: Option<Rect>,
    pub model: ModelSettings,
    pub schedule: ScheduleSettings,
    pub eval: EvalSettings,
}

#[derive(Debug, Clone, Copy)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

#[derive(Debug, Clone)]
pub struct ModelSettings {
    pub hidden_widths: Vec<usize>,
    pub mixtures: usize,
    pub variance_floor: f64,
    pub dropout_rate: f64,
    pub dropout_layers: Vec<usize>,
    pub init_std: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ScheduleSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_value: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalSettings {
    pub heatmap_cell_size: f64,
    pub sparsification_b_max: f64,
    pub sparsification_steps: usize,
    pub subcarrier_index: usize,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_inner(path, None)
    }

    /// Re-parses the file as if its `method` key were `method`; schedule
    /// defaults follow the override. The out-of-set driver uses this to run
    /// both methods from one config.
    pub fn load_with_method(path: &Path, method: Method) -> Result<Self> {
        Self::load_inner(path, Some(method))
    }

    fn load_inner(path: &Path, method_override: Option<Method>) -> Result<Self> {
        let kv = KvFile::read(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_kv(&kv, base, method_override)
            .with_context(|| format!("in config file {}", path.display()))
    }

    fn from_kv(kv: &KvFile, base: &Path, method_override: Option<Method>) -> Result<Self> {
        let resolve = |p: &str| -> PathBuf {
            let candidate = PathBuf::from(p);
            if candidate.is_absolute() {
                candidate
            } else {
                base.join(candidate)
            }
        };
        let method = match method_override {
            Some(m) => m,
            None => match kv.require("method")? {
                "mcd" => Method::McDropout,
                "den" => Method::DeepEnsemble,
                other => bail!("method must be `mcd` or `den`, got `{other}`"),
            },
        };
        let s_values: Vec<usize> = kv
            .require("s_values")?
            .split(',')
            .map(|v| v.trim().parse().context("parsing s_values"))
            .collect::<Result<_>>()?;
        if s_values.is_empty() || s_values.iter().any(|s| *s == 0) {
            bail!("s_values must be a nonempty list of counts >= 1");
        }

        let hidden_widths: Vec<usize> = match kv.get("hidden_widths") {
            Some(v) => v
                .split(',')
                .map(|w| w.trim().parse().context("parsing hidden_widths"))
                .collect::<Result<_>>()?,
            None => vec![512, 256, 128, 64],
        };
        let dropout_layers: Vec<usize> = match kv.get("dropout_layers") {
            Some(v) => v
                .split(',')
                .map(|l| l.trim().parse().context("parsing dropout_layers"))
                .collect::<Result<_>>()?,
            None => vec![1, 2, 3],
        };

        // Schedule defaults depend on the method.
        let (default_epochs, default_patience, default_clip) = match method {
            Method::McDropout => (600, 80, None),
            Method::DeepEnsemble => (300, 30, Some(1.0)),
        };
        let clip_value = match kv.get("clip_value") {
            None => default_clip,
            Some("none") => None,
            Some(v) => Some(v.parse::<f64>().context("parsing clip_value")?),
        };

        let out_of_set_region = kv
            .get("out_of_set_region")
            .map(|v| -> Result<Rect> {
                let f: Vec<f64> = v
                    .split(',')
                    .map(|p| p.trim().parse().context("parsing out_of_set_region"))
                    .collect::<Result<_>>()?;
                if f.len() != 4 {
                    bail!("out_of_set_region needs 4 values: x_min, y_min, x_max, y_max");
                }
                if f[0] >= f[2] || f[1] >= f[3] {
                    bail!("out_of_set_region must have min < max per axis");
                }
                Ok(Rect { min: [f[0], f[1]], max: [f[2], f[3]] })
            })
            .transpose()?;

        let config = Self {
            scene_file: resolve(kv.require("scene")?),
            dataset_file: kv.get("dataset").map(resolve),
            method,
            s_values,
            seed: kv.require_parsed("seed")?,
            out_dir: kv.get("out_dir").map(resolve),
            split: SplitFractions {
                train: kv.get_parsed("train_fraction")?.unwrap_or(0.7),
                val: kv.get_parsed("val_fraction")?.unwrap_or(0.15),
                test: kv.get_parsed("test_fraction")?.unwrap_or(0.15),
            },
            out_of_set_region,
            model: ModelSettings {
                hidden_widths,
                mixtures: kv.get_parsed("mixtures")?.unwrap_or(3),
                variance_floor: kv
                    .get_parsed("variance_floor")?
                    .unwrap_or(DEFAULT_VARIANCE_FLOOR),
                dropout_rate: kv.get_parsed("dropout_rate")?.unwrap_or(0.1),
                dropout_layers,
                init_std: kv.get_parsed("init_std")?.unwrap_or(0.1),
            },
            schedule: ScheduleSettings {
                learning_rate: kv.get_parsed("learning_rate")?.unwrap_or(1e-3),
                batch_size: kv.get_parsed("batch_size")?.unwrap_or(512),
                max_epochs: kv.get_parsed("max_epochs")?.unwrap_or(default_epochs),
                patience: kv.get_parsed("patience")?.unwrap_or(default_patience),
                clip_value,
            },
            eval: EvalSettings {
                heatmap_cell_size: kv.get_parsed("heatmap_cell_size")?.unwrap_or(1.0),
                sparsification_b_max: kv.get_parsed("sparsification_b_max")?.unwrap_or(0.99),
                sparsification_steps: kv.get_parsed("sparsification_steps")?.unwrap_or(100),
                subcarrier_index: kv.get_parsed("subcarrier_index")?.unwrap_or(1),
            },
        };
        Ok(config)
    }

    /// The head shared by every model of this experiment.
    pub fn head(&self) -> MdnHead {
        MdnHead {
            mixtures: self.model.mixtures,
            variance_floor: self.model.variance_floor,
        }
    }

    /// Network architecture for a given input width; dropout is configured
    /// here and disabled by the ensemble trainer for its members.
    pub fn mlp_config(&self, input_dim: usize) -> MlpConfig {
        MlpConfig {
            input_dim,
            hidden_widths: self.model.hidden_widths.clone(),
            output_units: 5 * self.model.mixtures,
            dropout_rate: self.model.dropout_rate,
            dropout_layers: self.model.dropout_layers.clone(),
            init_std: self.model.init_std,
            seed: derive_seed(self.seed, "init", 0),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.schedule.learning_rate,
            batch_size: self.schedule.batch_size,
            max_epochs: self.schedule.max_epochs,
            patience: self.schedule.patience,
            clip_value: self.schedule.clip_value,
            seed: derive_seed(self.seed, "train", 0),
            ..TrainConfig::default()
        }
    }

    /// Split specification; `region` overrides the config rectangle
    /// (used by the out-of-set driver to run with and without it).
    pub fn split_spec(&self, region: Option<Rect>) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train,
            val_fraction: self.split.val,
            test_fraction: self.split.test,
            shuffle_seed: derive_seed(self.seed, "split", 0),
            out_of_set_region: region,
        }
    }

    pub fn ensemble_base_seed(&self) -> u64 {
        derive_seed(self.seed, "ensemble", 0)
    }

    pub fn mcd_eval_seed(&self) -> u64 {
        derive_seed(self.seed, "mcd-eval", 0)
    }

    pub fn max_s(&self) -> usize {
        *self.s_values.iter().max().expect("validated nonempty")
    }
}
