//! Shared plumbing between subcommands: sample loading, splitting,
//! matrix assembly and batch inference over the test split.

use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use uqloc_core::dataset::{fit_normalizer, normalize, split, Rect, SplitSets, TestSample};
use uqloc_core::io::{read_dataset, read_scenario};
use uqloc_core::metrics::EvalRecord;
use uqloc_core::scene::generate_dataset;
use uqloc_core::uncertainty::{ensemble_estimate, mc_dropout_estimate};
use uqloc_core::{CsiSample, EnsembleHandle, Model, NormalizationState, PositionEstimate};

use crate::config::ExperimentConfig;

/// Loads the experiment's samples: from the configured dataset file when
/// present, otherwise synthesized from the scene description.
pub fn load_samples(config: &ExperimentConfig) -> Result<Vec<CsiSample>> {
    if let Some(path) = &config.dataset_file {
        return read_dataset(path)
            .with_context(|| format!("reading dataset {}", path.display()));
    }
    let scene = read_scenario(&config.scene_file)
        .with_context(|| format!("reading scene {}", config.scene_file.display()))?;
    generate_dataset(&scene, config.eval.subcarrier_index)
        .with_context(|| format!("synthesizing scene {}", config.scene_file.display()))
}

/// Deterministic train/val/test partition for this experiment; `region`
/// overrides the config's holdout rectangle.
pub fn split_samples(
    config: &ExperimentConfig,
    samples: &[CsiSample],
    region: Option<Rect>,
) -> Result<SplitSets> {
    let sets = split(samples, &config.split_spec(region)).context("splitting dataset")?;
    if sets.test.is_empty() {
        bail!("split produced no test samples");
    }
    Ok(sets)
}

/// Normalized feature and scaled-target matrices for a training or
/// validation split.
pub fn training_matrices(
    samples: &[CsiSample],
    norm: &NormalizationState,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if samples.is_empty() {
        bail!("cannot build matrices from an empty split");
    }
    let dim = samples[0].features.len();
    let mut features = Array2::zeros((samples.len(), dim));
    let mut targets = Array2::zeros((samples.len(), 2));
    for (i, sample) in samples.iter().enumerate() {
        let scaled = normalize(sample, norm);
        if scaled.features.len() != dim {
            bail!(
                "sample {} has {} features, expected {dim}",
                sample.location_id,
                scaled.features.len()
            );
        }
        features.row_mut(i).assign(&ArrayView1::from(&scaled.features[..]));
        targets[[i, 0]] = scaled.position[0];
        targets[[i, 1]] = scaled.position[1];
    }
    Ok((features, targets))
}

/// A test location ready for inference: features normalized, ground truth
/// kept in meters.
#[derive(Debug, Clone)]
pub struct TestPoint {
    pub location_id: usize,
    pub true_position: [f64; 2],
    pub los: bool,
    pub out_of_set: bool,
    pub features: Vec<f64>,
}

pub fn test_points(test: &[TestSample], norm: &NormalizationState) -> Vec<TestPoint> {
    test.iter()
        .map(|t| TestPoint {
            location_id: t.sample.location_id,
            true_position: t.sample.position,
            los: t.sample.los,
            out_of_set: t.out_of_set,
            features: t.sample.features.iter().map(|f| f / norm.delta_norm).collect(),
        })
        .collect()
}

/// Fits normalization on the train split and assembles train/val matrices
/// plus inference-ready test points.
pub struct Prepared {
    pub splits: SplitSets,
    pub normalization: NormalizationState,
    pub train_features: Array2<f64>,
    pub train_targets: Array2<f64>,
    pub val_features: Array2<f64>,
    pub val_targets: Array2<f64>,
}

pub fn prepare_training(
    config: &ExperimentConfig,
    samples: &[CsiSample],
    region: Option<Rect>,
) -> Result<Prepared> {
    let splits = split_samples(config, samples, region)?;
    let normalization = fit_normalizer(&splits.train).context("fitting normalizer")?;
    let (train_features, train_targets) = training_matrices(&splits.train, &normalization)?;
    let (val_features, val_targets) = training_matrices(&splits.val, &normalization)?;
    Ok(Prepared {
        splits,
        normalization,
        train_features,
        train_targets,
        val_features,
        val_targets,
    })
}

/// Runs one estimator over every test point in parallel; record order
/// follows the input order regardless of thread count.
pub fn evaluate_points<F>(points: &[TestPoint], estimate: F) -> Result<Vec<EvalRecord>>
where
    F: Fn(&TestPoint) -> Result<PositionEstimate> + Sync,
{
    points
        .par_iter()
        .map(|p| {
            let est = estimate(p)
                .with_context(|| format!("estimating location {}", p.location_id))?;
            Ok(EvalRecord::new(p.location_id, p.true_position, est, p.los, p.out_of_set))
        })
        .collect()
}

/// Test-time dropout records for one pass budget `s`.
pub fn mcd_records(
    model: &Model,
    norm: &NormalizationState,
    points: &[TestPoint],
    s: usize,
    mask_seed: u64,
) -> Result<Vec<EvalRecord>> {
    evaluate_points(points, |p| {
        mc_dropout_estimate(model, norm, &p.features, p.location_id, s, mask_seed)
            .map_err(Into::into)
    })
}

/// Ensemble records using the first `s` members.
pub fn den_records(
    handle: &EnsembleHandle,
    points: &[TestPoint],
    s: usize,
) -> Result<Vec<EvalRecord>> {
    let sub = handle.prefix(s).context("selecting ensemble prefix")?;
    evaluate_points(points, |p| ensemble_estimate(&sub, &p.features).map_err(Into::into))
}

/// Marks a command's output directory while it runs so interrupted runs
/// are recognizable; the final content is constant, keeping reruns
/// byte-identical.
pub struct StatusMarker {
    path: std::path::PathBuf,
}

impl StatusMarker {
    pub fn begin(out_dir: &Path, command: &str) -> Result<Self> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        let path = out_dir.join(format!("{command}.status"));
        std::fs::write(&path, "status = incomplete\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(Self { path })
    }

    pub fn finish(self) -> Result<()> {
        std::fs::write(&self.path, "status = complete\n")
            .with_context(|| format!("writing {}", self.path.display()))?;
        Ok(())
    }
}
