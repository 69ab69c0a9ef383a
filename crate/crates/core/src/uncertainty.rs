//! Model-uncertainty estimators: MC-dropout and deep ensembles.
//!
//! Both estimators collect S highest-weight-mixture predictions — S
//! stochastic dropout passes of one model, or one eval-mode pass per
//! ensemble member — and aggregate them identically: the empirical mean of
//! the per-pass means, the average of the per-pass variances (data
//! uncertainty), and the biased (1/S) spread of the per-pass means (model
//! uncertainty). Results are converted to meters/meters² here so every
//! downstream consumer sees physical units.

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::NormalizationState;
use crate::mdn::{MdnError, MdnHead, MdnPrediction};
use crate::net::{
    forward, train, ForwardMode, Loss, MlpConfig, ModelParams, NetError, TrainConfig, TrainOutcome,
};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum UncertaintyError {
    #[error("estimator needs at least one pass or member")]
    ZeroPasses,
    #[error("ensemble member {index} has a mismatched architecture: {detail}")]
    MemberMismatch { index: usize, detail: String },
    #[error("ensemble member {index} failed to train: {source}")]
    MemberFailed {
        index: usize,
        #[source]
        source: NetError,
    },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Mdn(#[from] MdnError),
}

/// Which estimator produced a [`PositionEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    McDropout,
    DeepEnsemble,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::McDropout => "mcd",
            Method::DeepEnsemble => "den",
        }
    }
}

/// Aggregated position estimate in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    /// Mean position, meters.
    pub mean: [f64; 2],
    /// Average predicted (aleatoric) variance, meters².
    pub data_variance: [f64; 2],
    /// Spread of per-pass means (epistemic), meters².
    pub model_variance: [f64; 2],
    /// `data_variance + model_variance`, exact by construction.
    pub total_variance: [f64; 2],
    /// Ranking key: trace of the total covariance, meters².
    pub uncertainty_scalar: f64,
    pub s_used: usize,
    pub method: Method,
}

/// A frozen network plus its output head.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: MlpConfig,
    pub params: ModelParams,
    pub head: MdnHead,
}

impl Model {
    /// Raw outputs for a single feature vector under the given mode.
    fn forward_one(&self, features: &[f64], mode: ForwardMode) -> Result<Vec<f64>, NetError> {
        let batch = Array2::from_shape_vec((1, features.len()), features.to_vec())
            .expect("row-shaped batch");
        let (raw, _) = forward(&self.params, &self.config, &batch, mode)?;
        Ok(raw.row(0).to_vec())
    }

    fn predict_one(
        &self,
        features: &[f64],
        mode: ForwardMode,
    ) -> Result<MdnPrediction, UncertaintyError> {
        let raw = self.forward_one(features, mode)?;
        let output = self.head.constrain(&raw)?;
        Ok(self.head.predict(&output))
    }
}

/// S frozen same-architecture members plus the shared normalization.
#[derive(Debug, Clone)]
pub struct EnsembleHandle {
    pub config: MlpConfig,
    pub head: MdnHead,
    pub members: Vec<ModelParams>,
    pub normalization: NormalizationState,
}

impl EnsembleHandle {
    pub fn new(
        config: MlpConfig,
        head: MdnHead,
        members: Vec<ModelParams>,
        normalization: NormalizationState,
    ) -> Result<Self, UncertaintyError> {
        if members.is_empty() {
            return Err(UncertaintyError::ZeroPasses);
        }
        let handle = Self { config, head, members, normalization };
        for (index, member) in handle.members.iter().enumerate() {
            let model = Model {
                config: handle.config.clone(),
                params: member.clone(),
                head: handle.head,
            };
            // A one-row forward validates the layer shape chain.
            let probe = vec![0.0; handle.config.input_dim];
            model
                .forward_one(&probe, ForwardMode::Eval)
                .map_err(|e| UncertaintyError::MemberMismatch { index, detail: e.to_string() })?;
        }
        Ok(handle)
    }

    /// A handle over the first `s` members, preserving order.
    pub fn prefix(&self, s: usize) -> Result<Self, UncertaintyError> {
        if s == 0 || s > self.members.len() {
            return Err(UncertaintyError::ZeroPasses);
        }
        Ok(Self {
            config: self.config.clone(),
            head: self.head,
            members: self.members[..s].to_vec(),
            normalization: self.normalization.clone(),
        })
    }
}

/// Combines per-pass highest-weight-mixture predictions (scaled space) into
/// a physical-unit estimate: mean of means, mean of variances (data), and
/// biased 1/S spread of means (model).
pub fn aggregate(
    passes: &[MdnPrediction],
    method: Method,
    normalization: &NormalizationState,
) -> Result<PositionEstimate, UncertaintyError> {
    if passes.is_empty() {
        return Err(UncertaintyError::ZeroPasses);
    }
    let s = passes.len() as f64;
    // Accumulate means centered on the first pass: when all passes agree
    // the deviations are exactly zero, so the model variance is exactly
    // zero rather than floating-point dust.
    let reference = passes[0].mean;
    let mut mean_scaled = [0.0; 2];
    let mut data_scaled = [0.0; 2];
    for p in passes {
        for c in 0..2 {
            mean_scaled[c] += (p.mean[c] - reference[c]) / s;
            data_scaled[c] += p.data_variance[c] / s;
        }
    }
    for c in 0..2 {
        mean_scaled[c] += reference[c];
    }
    let mut model_scaled = [0.0; 2];
    for p in passes {
        for c in 0..2 {
            let d = p.mean[c] - mean_scaled[c];
            model_scaled[c] += d * d / s;
        }
    }

    let switches = passes
        .iter()
        .filter(|p| p.chosen_mixture != passes[0].chosen_mixture)
        .count();
    if switches > 0 {
        log::debug!(
            "highest-weight mixture switched in {switches} of {} passes",
            passes.len()
        );
    }

    let slopes = normalization.slopes();
    let mean = normalization.unscale_position(mean_scaled);
    let mut data_variance = [0.0; 2];
    let mut model_variance = [0.0; 2];
    let mut total_variance = [0.0; 2];
    for c in 0..2 {
        data_variance[c] = data_scaled[c] * slopes[c] * slopes[c];
        model_variance[c] = model_scaled[c] * slopes[c] * slopes[c];
        total_variance[c] = data_variance[c] + model_variance[c];
    }
    Ok(PositionEstimate {
        mean,
        data_variance,
        model_variance,
        total_variance,
        uncertainty_scalar: total_variance[0] + total_variance[1],
        s_used: passes.len(),
        method,
    })
}

/// Runs `s` stochastic forward passes and returns the per-pass predictions
/// in scaled space. Mask seeds are derived per (location, pass), so results
/// do not depend on evaluation order across a test set.
pub fn mc_dropout_passes(
    model: &Model,
    features: &[f64],
    location_id: usize,
    s: usize,
    mask_seed: u64,
) -> Result<Vec<MdnPrediction>, UncertaintyError> {
    if s == 0 {
        return Err(UncertaintyError::ZeroPasses);
    }
    let sample_seed = derive_seed(mask_seed, "mcd-sample", location_id as u64);
    (0..s)
        .map(|pass| {
            let pass_seed = derive_seed(sample_seed, "mcd-pass", pass as u64);
            model.predict_one(features, ForwardMode::Stochastic { mask_seed: pass_seed })
        })
        .collect()
}

/// MC-dropout estimate: `s` seeded dropout passes aggregated into mean and
/// data/model variance, in meters.
pub fn mc_dropout_estimate(
    model: &Model,
    normalization: &NormalizationState,
    features: &[f64],
    location_id: usize,
    s: usize,
    mask_seed: u64,
) -> Result<PositionEstimate, UncertaintyError> {
    let passes = mc_dropout_passes(model, features, location_id, s, mask_seed)?;
    aggregate(&passes, Method::McDropout, normalization)
}

/// Deep-ensemble estimate: one eval-mode pass per member, aggregated with
/// the same formulas as MC-dropout.
pub fn ensemble_estimate(
    handle: &EnsembleHandle,
    features: &[f64],
) -> Result<PositionEstimate, UncertaintyError> {
    if handle.members.is_empty() {
        return Err(UncertaintyError::ZeroPasses);
    }
    let passes: Vec<MdnPrediction> = handle
        .members
        .iter()
        .map(|params| {
            let model = Model {
                config: handle.config.clone(),
                params: params.clone(),
                head: handle.head,
            };
            model.predict_one(features, ForwardMode::Eval)
        })
        .collect::<Result<_, _>>()?;
    aggregate(&passes, Method::DeepEnsemble, &handle.normalization)
}

/// Per-member training outcome bundled with the finished handle.
pub struct EnsembleTrainOutcome {
    pub handle: EnsembleHandle,
    pub histories: Vec<TrainOutcome>,
}

/// Trains `s` independent members with seeds `base_seed + index` and
/// dropout forced off; members run in parallel under the ambient rayon
/// pool, and results are identical regardless of thread count.
#[allow(clippy::too_many_arguments)]
pub fn train_ensemble<L: Loss>(
    model_cfg: &MlpConfig,
    train_cfg: &TrainConfig,
    head: MdnHead,
    normalization: NormalizationState,
    train_features: &Array2<f64>,
    train_targets: &Array2<f64>,
    val_features: &Array2<f64>,
    val_targets: &Array2<f64>,
    s: usize,
    base_seed: u64,
    loss_fn: &L,
) -> Result<EnsembleTrainOutcome, UncertaintyError> {
    if s == 0 {
        return Err(UncertaintyError::ZeroPasses);
    }
    let mut member_cfg = model_cfg.clone();
    member_cfg.dropout_rate = 0.0;
    member_cfg.dropout_layers.clear();

    let outcomes: Vec<TrainOutcome> = (0..s)
        .into_par_iter()
        .map(|index| {
            let mut cfg = member_cfg.clone();
            cfg.seed = base_seed + index as u64;
            let mut tc = train_cfg.clone();
            tc.seed = base_seed + index as u64;
            train(
                &cfg,
                &tc,
                train_features,
                train_targets,
                val_features,
                val_targets,
                loss_fn,
            )
            .map_err(|source| UncertaintyError::MemberFailed { index, source })
        })
        .collect::<Result<_, _>>()?;

    let members = outcomes.iter().map(|o| o.params.clone()).collect();
    let handle = EnsembleHandle::new(member_cfg, head, members, normalization)?;
    Ok(EnsembleTrainOutcome { handle, histories: outcomes })
}
