//! Gaussian-mixture output head for 2-D position regression.
//!
//! The network's raw output vector of length `5K` is laid out as
//! `[K weight logits | 2K means | 2K variance pre-activations]`, one
//! `(x, y)` pair per mixture. Constraining maps logits through a stable
//! softmax, means through the identity, and variance pre-activations
//! through softplus plus a small floor, giving a diagonal-covariance
//! mixture over scaled coordinates. The training criterion is the negative
//! log-likelihood of the target under that mixture, evaluated in log space;
//! the point prediction is the mean/variance pair of the highest-weight
//! mixture.

use ndarray::Array2;
use thiserror::Error;

use crate::net::{Loss, NetError};

/// Default mixture count.
pub const DEFAULT_MIXTURES: usize = 3;
/// Additive floor on constrained variances, in scaled units squared.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

const LN_TWO_PI: f64 = 1.8378770664093453;

#[derive(Debug, Error)]
pub enum MdnError {
    #[error("raw output has length {got}, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("raw output contains a non-finite value at index {0}")]
    NonFinite(usize),
}

/// Head configuration: mixture count and variance floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdnHead {
    pub mixtures: usize,
    pub variance_floor: f64,
}

impl MdnHead {
    pub fn new(mixtures: usize) -> Self {
        Self { mixtures, variance_floor: DEFAULT_VARIANCE_FLOOR }
    }

    /// Required raw output width: `5K`.
    pub fn output_units(&self) -> usize {
        5 * self.mixtures
    }
}

/// Constrained mixture parameters produced by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MdnOutput {
    /// Simplex weights, one per mixture.
    pub weights: Vec<f64>,
    /// Mean pairs in scaled coordinates.
    pub means: Vec<[f64; 2]>,
    /// Diagonal variance pairs in scaled coordinates squared.
    pub variances: Vec<[f64; 2]>,
}

/// Highest-weight-mixture point prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdnPrediction {
    pub mean: [f64; 2],
    pub data_variance: [f64; 2],
    pub chosen_mixture: usize,
    pub chosen_weight: f64,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl MdnHead {
    /// Maps a raw `5K` output vector onto constrained mixture parameters.
    pub fn constrain(&self, raw: &[f64]) -> Result<MdnOutput, MdnError> {
        let k = self.mixtures;
        if raw.len() != 5 * k {
            return Err(MdnError::BadLength { expected: 5 * k, got: raw.len() });
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(MdnError::NonFinite(i));
        }
        let logits = &raw[..k];
        let max_logit = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max_logit).exp()).collect();
        let norm: f64 = exps.iter().sum();
        let weights = exps.iter().map(|e| e / norm).collect();

        let means = (0..k)
            .map(|m| [raw[k + 2 * m], raw[k + 2 * m + 1]])
            .collect();
        let variances = (0..k)
            .map(|m| {
                [
                    softplus(raw[3 * k + 2 * m]) + self.variance_floor,
                    softplus(raw[3 * k + 2 * m + 1]) + self.variance_floor,
                ]
            })
            .collect();
        Ok(MdnOutput { weights, means, variances })
    }

    /// Negative log-likelihood of `target` under the mixture, evaluated via
    /// log-sum-exp over per-mixture log densities.
    pub fn nll(&self, output: &MdnOutput, target: [f64; 2]) -> f64 {
        let terms: Vec<f64> = output
            .weights
            .iter()
            .zip(output.means.iter().zip(&output.variances))
            .map(|(w, (mean, var))| {
                let mut log_density = 0.0;
                for c in 0..2 {
                    let d = target[c] - mean[c];
                    log_density -= 0.5 * (LN_TWO_PI + var[c].ln()) + d * d / (2.0 * var[c]);
                }
                w.ln() + log_density
            })
            .collect();
        -log_sum_exp(&terms)
    }

    /// Selects the highest-weight mixture; ties break toward the lowest
    /// index.
    pub fn predict(&self, output: &MdnOutput) -> MdnPrediction {
        let mut chosen = 0;
        for (i, w) in output.weights.iter().enumerate() {
            if *w > output.weights[chosen] {
                chosen = i;
            }
        }
        MdnPrediction {
            mean: output.means[chosen],
            data_variance: output.variances[chosen],
            chosen_mixture: chosen,
            chosen_weight: output.weights[chosen],
        }
    }
}

/// The mixture NLL as a trainable loss over raw network outputs.
///
/// Gradients flow through the softmax, identity and softplus constraints in
/// closed form, using the per-mixture posterior responsibilities.
#[derive(Debug, Clone, Copy)]
pub struct MdnLoss {
    pub head: MdnHead,
}

impl MdnLoss {
    pub fn new(head: MdnHead) -> Self {
        Self { head }
    }

    /// Per-row NLL plus, optionally, the gradient w.r.t. that row's raw
    /// outputs (unscaled by the batch size).
    fn row_loss(&self, raw: &[f64], target: [f64; 2], mut grad: Option<&mut [f64]>) -> f64 {
        let k = self.head.mixtures;
        let floor = self.head.variance_floor;
        let logits = &raw[..k];
        let lse_logits = log_sum_exp(logits);

        // Per-mixture joint log terms t_k = log w_k + log N_k.
        let mut terms = vec![0.0; k];
        for m in 0..k {
            let mut log_density = 0.0;
            for c in 0..2 {
                let var = softplus(raw[3 * k + 2 * m + c]) + floor;
                let d = target[c] - raw[k + 2 * m + c];
                log_density -= 0.5 * (LN_TWO_PI + var.ln()) + d * d / (2.0 * var);
            }
            terms[m] = (logits[m] - lse_logits) + log_density;
        }
        let lse_terms = log_sum_exp(&terms);
        let loss = -lse_terms;

        if let Some(grad) = grad.as_deref_mut() {
            for m in 0..k {
                let responsibility = (terms[m] - lse_terms).exp();
                let weight = (logits[m] - lse_logits).exp();
                grad[m] = weight - responsibility;
                for c in 0..2 {
                    let z_var = raw[3 * k + 2 * m + c];
                    let var = softplus(z_var) + floor;
                    let d = raw[k + 2 * m + c] - target[c];
                    grad[k + 2 * m + c] = responsibility * d / var;
                    grad[3 * k + 2 * m + c] = responsibility
                        * (0.5 / var - d * d / (2.0 * var * var))
                        * sigmoid(z_var);
                }
            }
        }
        loss
    }

    fn check_shapes(&self, raw: &Array2<f64>, targets: &Array2<f64>) -> Result<(), NetError> {
        if raw.ncols() != self.head.output_units() || targets.ncols() != 2
            || raw.nrows() != targets.nrows()
        {
            return Err(NetError::ShapeMismatch(format!(
                "loss expects raw [n x {}] and targets [n x 2], got [{} x {}] and [{} x {}]",
                self.head.output_units(),
                raw.nrows(),
                raw.ncols(),
                targets.nrows(),
                targets.ncols()
            )));
        }
        Ok(())
    }
}

impl Loss for MdnLoss {
    fn output_units(&self) -> usize {
        self.head.output_units()
    }

    fn loss(&self, raw: &Array2<f64>, targets: &Array2<f64>) -> Result<f64, NetError> {
        self.check_shapes(raw, targets)?;
        let n = raw.nrows();
        let mut total = 0.0;
        for (i, (row, target)) in raw.rows().into_iter().zip(targets.rows()).enumerate() {
            let l = self.row_loss(
                row.as_slice().expect("contiguous raw row"),
                [target[0], target[1]],
                None,
            );
            if !l.is_finite() {
                return Err(NetError::NonFiniteLoss { row: i });
            }
            total += l;
        }
        Ok(total / n as f64)
    }

    fn loss_and_grad(
        &self,
        raw: &Array2<f64>,
        targets: &Array2<f64>,
    ) -> Result<(f64, Array2<f64>), NetError> {
        self.check_shapes(raw, targets)?;
        let n = raw.nrows();
        let mut grad = Array2::zeros(raw.raw_dim());
        let mut total = 0.0;
        for i in 0..n {
            let row = raw.row(i);
            let target = targets.row(i);
            let mut grad_row = grad.row_mut(i);
            let l = self.row_loss(
                row.as_slice().expect("contiguous raw row"),
                [target[0], target[1]],
                Some(grad_row.as_slice_mut().expect("contiguous grad row")),
            );
            if !l.is_finite() {
                return Err(NetError::NonFiniteLoss { row: i });
            }
            total += l;
        }
        grad.mapv_inplace(|g| g / n as f64);
        Ok((total / n as f64, grad))
    }
}
