//! The four subcommands. Each one is a pure function of (config, seed,
//! input files): rerunning with the same inputs rewrites the same bytes.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;

use uqloc_core::dataset::Rect;
use uqloc_core::io::{
    load_ensemble, load_model, load_normalization, read_scenario, save_ensemble, save_model,
    save_normalization, write_dataset,
};
use uqloc_core::mdn::MdnLoss;
use uqloc_core::metrics::{heatmap, rmse, sparsification, EvalRecord, HeatmapField};
use uqloc_core::net::train;
use uqloc_core::scene::generate_dataset;
use uqloc_core::uncertainty::train_ensemble;
use uqloc_core::{Method, Model};

use crate::config::ExperimentConfig;
use crate::pipeline::{
    den_records, load_samples, mcd_records, prepare_training, split_samples, test_points,
    StatusMarker,
};
use crate::report::{self, ComparisonRow};

/// Synthesizes the configured scene and writes `dataset.csv`.
pub fn cmd_generate(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let marker = StatusMarker::begin(out_dir, "generate")?;
    let scene = read_scenario(&config.scene_file)
        .with_context(|| format!("reading scene {}", config.scene_file.display()))?;
    let samples = generate_dataset(&scene, config.eval.subcarrier_index)
        .with_context(|| format!("synthesizing scene {}", config.scene_file.display()))?;
    let path = out_dir.join("dataset.csv");
    write_dataset(&path, &samples)?;
    let los = samples.iter().filter(|s| s.los).count();
    println!(
        "wrote {} samples ({} LOS, {} NLOS, {} antennas) to {}",
        samples.len(),
        los,
        samples.len() - los,
        samples[0].features.len() / 2,
        path.display()
    );
    marker.finish()
}

/// Trains the configured estimator and writes checkpoints plus loss
/// histories into the output directory.
pub fn cmd_train(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let marker = StatusMarker::begin(out_dir, "train")?;
    run_training(config, out_dir)?;
    marker.finish()
}

fn run_training(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let samples = load_samples(config)?;
    let prepared = prepare_training(config, &samples, config.out_of_set_region)?;
    let input_dim = prepared.train_features.ncols();
    let loss = MdnLoss::new(config.head());
    let model_cfg = config.mlp_config(input_dim);
    let train_cfg = config.train_config();
    info!(
        "training {} on {} train / {} val samples ({} features, {} test held out)",
        config.method.label(),
        prepared.train_features.nrows(),
        prepared.val_features.nrows(),
        input_dim,
        prepared.splits.test.len()
    );

    match config.method {
        Method::McDropout => {
            let outcome = train(
                &model_cfg,
                &train_cfg,
                &prepared.train_features,
                &prepared.train_targets,
                &prepared.val_features,
                &prepared.val_targets,
                &loss,
            )
            .context("training dropout model")?;
            info!(
                "best validation NLL {:.6} at epoch {} ({} epochs run)",
                outcome.best_val_loss,
                outcome.best_epoch,
                outcome.history.len()
            );
            let model = Model {
                config: model_cfg,
                params: outcome.params,
                head: config.head(),
            };
            save_model(out_dir, "mcd", &model)?;
            save_normalization(&out_dir.join("mcd.norm"), &prepared.normalization)?;
            report::write_history(&out_dir.join("history-mcd.csv"), &outcome.history)?;
        }
        Method::DeepEnsemble => {
            let s = config.max_s();
            let outcome = train_ensemble(
                &model_cfg,
                &train_cfg,
                config.head(),
                prepared.normalization.clone(),
                &prepared.train_features,
                &prepared.train_targets,
                &prepared.val_features,
                &prepared.val_targets,
                s,
                config.ensemble_base_seed(),
                &loss,
            )
            .context("training ensemble")?;
            for (index, member) in outcome.histories.iter().enumerate() {
                info!(
                    "member {index}: best validation NLL {:.6} at epoch {}",
                    member.best_val_loss, member.best_epoch
                );
                report::write_history(
                    &out_dir.join(format!("history-den-member-{index:03}.csv")),
                    &member.history,
                )?;
            }
            save_ensemble(out_dir, "den", &outcome.handle)?;
        }
    }
    Ok(())
}

/// Scores the trained estimator on the test split for every configured
/// sample count and writes predictions, curves, tables and heatmaps.
/// Returns the records at the largest sample count.
pub fn cmd_evaluate(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<EvalRecord>> {
    let marker = StatusMarker::begin(out_dir, "evaluate")?;
    let records = run_evaluation(config, out_dir)?;
    marker.finish()?;
    Ok(records)
}

fn run_evaluation(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<EvalRecord>> {
    let samples = load_samples(config)?;
    let sets = split_samples(config, &samples, config.out_of_set_region)?;
    let label = config.method.label();

    enum Estimator {
        Mcd(Box<Model>, uqloc_core::NormalizationState),
        Den(uqloc_core::EnsembleHandle),
    }
    let estimator = match config.method {
        Method::McDropout => {
            let model = load_model(out_dir, "mcd")
                .with_context(|| format!("loading checkpoint from {}", out_dir.display()))?;
            let norm = load_normalization(&out_dir.join("mcd.norm"))?;
            Estimator::Mcd(Box::new(model), norm)
        }
        Method::DeepEnsemble => {
            let handle = load_ensemble(out_dir, "den")
                .with_context(|| format!("loading ensemble from {}", out_dir.display()))?;
            Estimator::Den(handle)
        }
    };
    let norm = match &estimator {
        Estimator::Mcd(_, norm) => norm.clone(),
        Estimator::Den(handle) => handle.normalization.clone(),
    };
    let points = test_points(&sets.test, &norm);
    info!("evaluating {label} on {} test points", points.len());

    let mut s_list = config.s_values.clone();
    s_list.sort_unstable();
    s_list.dedup();
    let s_max = *s_list.last().expect("validated nonempty");

    let mut rmse_rows = Vec::new();
    let mut auco_rows = Vec::new();
    let mut records_at_max = None;
    for &s in &s_list {
        let records = match &estimator {
            Estimator::Mcd(model, norm) => {
                mcd_records(model, norm, &points, s, config.mcd_eval_seed())?
            }
            Estimator::Den(handle) => den_records(handle, &points, s)?,
        };
        report::write_predictions(
            &out_dir.join(format!("predictions-{label}-s{s:03}.csv")),
            &records,
        )?;
        let curve = sparsification(
            &records,
            config.eval.sparsification_b_max,
            config.eval.sparsification_steps,
        )?;
        report::write_curve(&out_dir.join(format!("curve-{label}-s{s:03}.csv")), &curve)?;
        let err = rmse(&records)?;
        info!("s = {s}: RMSE {err:.4} m, AUCO {:.4}", curve.auco);
        rmse_rows.push((s, err));
        auco_rows.push((s, curve.auco));
        if s == s_max {
            records_at_max = Some(records);
        }
    }
    report::write_rmse_table(&out_dir.join(format!("rmse-vs-s-{label}.csv")), &rmse_rows)?;
    report::write_auco_table(&out_dir.join(format!("auco-vs-s-{label}.csv")), &auco_rows)?;

    let records = records_at_max.expect("loop ran at least once");
    write_heatmaps(config, out_dir, label, &records)?;
    Ok(records)
}

type SubsetFilter = fn(&&EvalRecord) -> bool;

fn write_heatmaps(
    config: &ExperimentConfig,
    out_dir: &Path,
    label: &str,
    records: &[EvalRecord],
) -> Result<()> {
    let subsets: [(&str, SubsetFilter); 4] = [
        ("all", |_| true),
        ("los", |r| r.los && !r.out_of_set),
        ("nlos", |r| !r.los && !r.out_of_set),
        ("oos", |r| r.out_of_set),
    ];
    let fields = [
        HeatmapField::Rmse,
        HeatmapField::DataVar,
        HeatmapField::ModelVar,
        HeatmapField::TotalVar,
    ];
    for (subset_label, filter) in subsets {
        let subset: Vec<EvalRecord> = records.iter().filter(filter).cloned().collect();
        if subset.is_empty() {
            continue;
        }
        for field in fields {
            let map = heatmap(&subset, config.eval.heatmap_cell_size, field)?;
            report::write_heatmap(
                &out_dir.join(format!(
                    "heatmap-{label}-{subset_label}-{}.csv",
                    field.label()
                )),
                &map,
            )?;
        }
    }
    Ok(())
}

/// Trains and evaluates both methods twice — once without the holdout
/// rectangle (baseline) and once with it — then writes `comparison.csv`
/// with mean variances inside versus outside the region.
pub fn cmd_oos(
    config_path: &Path,
    base: &ExperimentConfig,
    seed_override: Option<u64>,
    out_dir: &Path,
) -> Result<()> {
    let Some(region) = base.out_of_set_region else {
        bail!("the oos command needs `out_of_set_region` in the config");
    };
    let marker = StatusMarker::begin(out_dir, "oos")?;

    let variants: [(&str, Option<Rect>); 2] =
        [("baseline", None), ("holdout", Some(region))];
    let methods = [Method::McDropout, Method::DeepEnsemble];
    let mut holdout_records: Vec<(Method, Vec<EvalRecord>)> = Vec::new();

    for (variant, variant_region) in variants {
        for method in methods {
            let mut config = ExperimentConfig::load_with_method(config_path, method)?;
            if let Some(seed) = seed_override {
                config.seed = seed;
            }
            config.out_of_set_region = variant_region;
            let run_dir = out_dir.join(variant);
            info!("oos run: {variant} / {}", method.label());
            cmd_train(&config, &run_dir)?;
            let records = cmd_evaluate(&config, &run_dir)?;
            if variant == "holdout" {
                holdout_records.push((method, records));
            }
        }
    }

    let rows = comparison_rows(&region, &holdout_records)?;
    report::write_comparison(&out_dir.join("comparison.csv"), &rows)?;
    marker.finish()
}

/// Mean variance traces of the holdout run's test records, split by
/// whether the true position lies inside the rectangle.
fn comparison_rows(
    region: &Rect,
    holdout_records: &[(Method, Vec<EvalRecord>)],
) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for (region_label, inside) in [("in_region", true), ("out_region", false)] {
        for (method, records) in holdout_records {
            let partition: Vec<&EvalRecord> = records
                .iter()
                .filter(|r| region.contains(r.true_position) == inside)
                .collect();
            if partition.is_empty() {
                bail!(
                    "no test samples {} the out-of-set region",
                    if inside { "inside" } else { "outside" }
                );
            }
            let n = partition.len() as f64;
            let mean_trace = |extract: fn(&EvalRecord) -> [f64; 2]| {
                partition.iter().map(|r| extract(r).iter().sum::<f64>()).sum::<f64>() / n
            };
            for (metric, value) in [
                ("data", mean_trace(|r| r.estimate.data_variance)),
                ("model", mean_trace(|r| r.estimate.model_variance)),
                ("total", mean_trace(|r| r.estimate.total_variance)),
            ] {
                rows.push(ComparisonRow {
                    region: region_label,
                    method: method.label(),
                    metric,
                    mean_value: value,
                });
            }
        }
    }
    Ok(rows)
}

/// Resolves the output directory: the `--out` flag wins over the config's
/// `out_dir` key.
pub fn resolve_out_dir(config: &ExperimentConfig, flag: Option<&PathBuf>) -> Result<PathBuf> {
    flag.cloned()
        .or_else(|| config.out_dir.clone())
        .context("no output directory: set `out_dir` in the config or pass --out")
}
