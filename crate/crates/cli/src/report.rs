//! Deterministic text reports: prediction dumps, training histories,
//! sparsification curves, heatmaps and summary tables.
//!
//! Every float is written with [`format_f64`] (17 significant digits), so
//! files round-trip losslessly and identical runs produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use uqloc_core::io::kv::format_f64;
use uqloc_core::metrics::{EvalRecord, Heatmap, SparsificationCurve};
use uqloc_core::net::EpochStats;

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Per-location predictions with the variance decomposition, one row per
/// test sample in split order.
pub fn write_predictions(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut text = String::from(
        "location_id,x_true,y_true,x_est,y_est,var_data_x,var_data_y,\
         var_model_x,var_model_y,los_flag,out_of_set_flag\n",
    );
    for r in records {
        let e = &r.estimate;
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.location_id,
            format_f64(r.true_position[0]),
            format_f64(r.true_position[1]),
            format_f64(e.mean[0]),
            format_f64(e.mean[1]),
            format_f64(e.data_variance[0]),
            format_f64(e.data_variance[1]),
            format_f64(e.model_variance[0]),
            format_f64(e.model_variance[1]),
            u8::from(r.los),
            u8::from(r.out_of_set),
        )
        .expect("string write");
    }
    write_text(path, &text)
}

/// One row per completed epoch with train and validation NLL.
pub fn write_history(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut text = String::from("epoch,train_nll,val_nll\n");
    for h in history {
        writeln!(
            text,
            "{},{},{}",
            h.epoch,
            format_f64(h.train_loss),
            format_f64(h.val_loss)
        )
        .expect("string write");
    }
    write_text(path, &text)
}

/// Sparsification curve: removal fraction, both RMSE orderings and their
/// gap, all in meters.
pub fn write_curve(path: &Path, curve: &SparsificationCurve) -> Result<()> {
    let mut text = String::from("b,rmse_conf,rmse_orac,alpha\n");
    for i in 0..curve.fractions.len() {
        writeln!(
            text,
            "{},{},{},{}",
            format_f64(curve.fractions[i]),
            format_f64(curve.rmse_conf[i]),
            format_f64(curve.rmse_orac[i]),
            format_f64(curve.alpha[i]),
        )
        .expect("string write");
    }
    write_text(path, &text)
}

/// Occupied heatmap cells, one row each, addressed by cell center.
pub fn write_heatmap(path: &Path, map: &Heatmap) -> Result<()> {
    let mut text = String::from("cell_x,cell_y,value,count\n");
    for cell in &map.cells {
        writeln!(
            text,
            "{},{},{},{}",
            format_f64(cell.center[0]),
            format_f64(cell.center[1]),
            format_f64(cell.value),
            cell.count,
        )
        .expect("string write");
    }
    write_text(path, &text)
}

/// RMSE against sample count, in meters plus a column normalized to the
/// first row for shape comparisons.
pub fn write_rmse_table(path: &Path, rows: &[(usize, f64)]) -> Result<()> {
    let mut text = String::from("s,rmse,rmse_normalized\n");
    let reference = rows.first().map(|(_, v)| *v).unwrap_or(1.0);
    for (s, value) in rows {
        writeln!(
            text,
            "{},{},{}",
            s,
            format_f64(*value),
            format_f64(if reference > 0.0 { value / reference } else { f64::NAN }),
        )
        .expect("string write");
    }
    write_text(path, &text)
}

/// Area under the confidence-oracle gap against sample count.
pub fn write_auco_table(path: &Path, rows: &[(usize, f64)]) -> Result<()> {
    let mut text = String::from("s,auco\n");
    for (s, value) in rows {
        writeln!(text, "{},{}", s, format_f64(*value)).expect("string write");
    }
    write_text(path, &text)
}

/// One comparison row: (region, method, metric) identifies a mean variance
/// over a test partition.
pub struct ComparisonRow {
    pub region: &'static str,
    pub method: &'static str,
    pub metric: &'static str,
    pub mean_value: f64,
}

pub fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut text = String::from("region,method,metric,mean_value\n");
    for r in rows {
        writeln!(
            text,
            "{},{},{},{}",
            r.region,
            r.method,
            r.metric,
            format_f64(r.mean_value)
        )
        .expect("string write");
    }
    write_text(path, &text)
}
