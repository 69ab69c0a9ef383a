//! Accuracy and uncertainty-quality metrics: RMSE, confidence-oracle
//! sparsification curves with their area (AUCO), and spatial heatmap
//! binning.
//!
//! A sparsification curve removes a growing fraction of test locations,
//! ranked either by predicted uncertainty (confidence curve) or by true
//! error (oracle curve), and tracks the RMSE of the records that remain.
//! The closer the confidence curve tracks the oracle, the better the
//! uncertainty ranks the errors; AUCO integrates the absolute gap.

use thiserror::Error;

use crate::uncertainty::PositionEstimate;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metric requires at least one record")]
    EmptyRecords,
    #[error("fraction grid invalid: {0}")]
    BadFractions(String),
    #[error("cell size must be positive, got {0}")]
    BadCellSize(f64),
}

/// One evaluated test location.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub location_id: usize,
    /// Ground-truth position, meters.
    pub true_position: [f64; 2],
    pub estimate: PositionEstimate,
    /// Squared Euclidean error of the mean estimate, meters².
    pub squared_error: f64,
    pub los: bool,
    pub out_of_set: bool,
}

impl EvalRecord {
    pub fn new(
        location_id: usize,
        true_position: [f64; 2],
        estimate: PositionEstimate,
        los: bool,
        out_of_set: bool,
    ) -> Self {
        let dx = true_position[0] - estimate.mean[0];
        let dy = true_position[1] - estimate.mean[1];
        Self {
            location_id,
            true_position,
            estimate,
            squared_error: dx * dx + dy * dy,
            los,
            out_of_set,
        }
    }
}

/// Root mean squared position error in meters.
pub fn rmse(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let mean: f64 =
        records.iter().map(|r| r.squared_error).sum::<f64>() / records.len() as f64;
    Ok(mean.sqrt())
}

/// Confidence and oracle RMSE over a shared removal-fraction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsificationCurve {
    /// Removal fractions b_i, uniform from 0 to b_max.
    pub fractions: Vec<f64>,
    /// RMSE over the remaining records after removing the most uncertain.
    pub rmse_conf: Vec<f64>,
    /// RMSE over the remaining records after removing the largest errors.
    pub rmse_orac: Vec<f64>,
    /// rmse_orac - rmse_conf per fraction (≤ 0 point-wise).
    pub alpha: Vec<f64>,
    /// Trapezoidal integral of |alpha| over the fraction grid.
    pub auco: f64,
}

/// RMSE over the suffix of `order` starting at index `k`, from precomputed
/// suffix sums of squared errors.
fn suffix_rmse(suffix_sums: &[f64], n: usize, k: usize) -> f64 {
    (suffix_sums[k] / (n - k) as f64).sqrt()
}

/// Sweeps removal fractions from 0 to `b_max` in `n_steps` uniform steps,
/// removing ⌊b·N⌋ records ranked by descending uncertainty (confidence
/// curve) or descending squared error (oracle curve), and reports the RMSE
/// of the remaining records.
pub fn sparsification(
    records: &[EvalRecord],
    b_max: f64,
    n_steps: usize,
) -> Result<SparsificationCurve, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    if !(0.0..1.0).contains(&b_max) {
        return Err(MetricsError::BadFractions(format!("b_max {b_max} outside [0, 1)")));
    }
    if n_steps == 0 {
        return Err(MetricsError::BadFractions("n_steps must be at least 1".into()));
    }
    let n = records.len();

    let ordering_suffix_sums = |key: &dyn Fn(&EvalRecord) -> f64| {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            key(&records[b])
                .total_cmp(&key(&records[a]))
                .then(records[a].location_id.cmp(&records[b].location_id))
        });
        // suffix[k] = sum of squared errors of order[k..].
        let mut suffix = vec![0.0; n + 1];
        for k in (0..n).rev() {
            suffix[k] = suffix[k + 1] + records[order[k]].squared_error;
        }
        suffix
    };
    let conf_suffix = ordering_suffix_sums(&|r| r.estimate.uncertainty_scalar);
    let orac_suffix = ordering_suffix_sums(&|r| r.squared_error);

    let mut fractions = Vec::with_capacity(n_steps + 1);
    let mut rmse_conf = Vec::with_capacity(n_steps + 1);
    let mut rmse_orac = Vec::with_capacity(n_steps + 1);
    let mut alpha = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let b = b_max * i as f64 / n_steps as f64;
        let k = ((b * n as f64).floor() as usize).min(n - 1);
        let conf = suffix_rmse(&conf_suffix, n, k);
        let orac = suffix_rmse(&orac_suffix, n, k);
        fractions.push(b);
        rmse_conf.push(conf);
        rmse_orac.push(orac);
        alpha.push(orac - conf);
    }
    let mut auco = 0.0;
    for i in 0..n_steps {
        let db = fractions[i + 1] - fractions[i];
        auco += db * (alpha[i].abs() + alpha[i + 1].abs()) / 2.0;
    }
    Ok(SparsificationCurve { fractions, rmse_conf, rmse_orac, alpha, auco })
}

/// Which per-record quantity a heatmap aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapField {
    /// Per-cell RMSE of the position error.
    Rmse,
    /// Mean trace of the data variance.
    DataVar,
    /// Mean trace of the model variance.
    ModelVar,
    /// Mean trace of the total variance.
    TotalVar,
}

impl HeatmapField {
    pub fn label(&self) -> &'static str {
        match self {
            HeatmapField::Rmse => "rmse",
            HeatmapField::DataVar => "data_var",
            HeatmapField::ModelVar => "model_var",
            HeatmapField::TotalVar => "total_var",
        }
    }

    fn record_value(&self, r: &EvalRecord) -> f64 {
        match self {
            HeatmapField::Rmse => r.squared_error,
            HeatmapField::DataVar => r.estimate.data_variance[0] + r.estimate.data_variance[1],
            HeatmapField::ModelVar => r.estimate.model_variance[0] + r.estimate.model_variance[1],
            HeatmapField::TotalVar => r.estimate.uncertainty_scalar,
        }
    }
}

/// One occupied heatmap cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapCell {
    pub col: usize,
    pub row: usize,
    /// Cell center, meters.
    pub center: [f64; 2],
    pub value: f64,
    pub count: usize,
}

/// Occupied cells of an axis-aligned grid over the records' bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    /// Sorted by (row, col); empty cells are absent.
    pub cells: Vec<HeatmapCell>,
}

/// Bins records by true position into square cells and aggregates the
/// chosen field per cell (RMSE for errors, mean for variances).
pub fn heatmap(
    records: &[EvalRecord],
    cell_size: f64,
    field: HeatmapField,
) -> Result<Heatmap, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    if !(cell_size > 0.0) {
        return Err(MetricsError::BadCellSize(cell_size));
    }
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for r in records {
        for c in 0..2 {
            min[c] = min[c].min(r.true_position[c]);
            max[c] = max[c].max(r.true_position[c]);
        }
    }
    let cells_along = |extent: f64| ((extent / cell_size).ceil() as usize).max(1);
    let n_cols = cells_along(max[0] - min[0]);
    let n_rows = cells_along(max[1] - min[1]);

    let mut sums = vec![0.0; n_cols * n_rows];
    let mut counts = vec![0usize; n_cols * n_rows];
    for r in records {
        let col = (((r.true_position[0] - min[0]) / cell_size) as usize).min(n_cols - 1);
        let row = (((r.true_position[1] - min[1]) / cell_size) as usize).min(n_rows - 1);
        let idx = row * n_cols + col;
        sums[idx] += field.record_value(r);
        counts[idx] += 1;
    }
    let mut cells = Vec::new();
    for row in 0..n_rows {
        for col in 0..n_cols {
            let idx = row * n_cols + col;
            if counts[idx] == 0 {
                continue;
            }
            let mean = sums[idx] / counts[idx] as f64;
            let value = match field {
                HeatmapField::Rmse => mean.sqrt(),
                _ => mean,
            };
            cells.push(HeatmapCell {
                col,
                row,
                center: [
                    min[0] + (col as f64 + 0.5) * cell_size,
                    min[1] + (row as f64 + 0.5) * cell_size,
                ],
                value,
                count: counts[idx],
            });
        }
    }
    Ok(Heatmap { origin: min, cell_size, n_cols, n_rows, cells })
}
