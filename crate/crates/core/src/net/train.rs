//! Minibatch training loop: seeded reshuffling, Adam updates, optional
//! element-wise clipping, validation-based early stopping.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{backward, forward, init_params, Adam, ForwardMode, Loss, MlpConfig, NetError};
use super::{clip_gradients, ModelParams};
use crate::seed::derive_seed;

/// Optimizer and schedule settings. Defaults carry the usual Adam
/// constants; learning rate and batch size default to 1e-3 and 512.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated before stopping; 0 stops
    /// at the first non-improving epoch.
    pub patience: usize,
    /// Element-wise gradient clamp; `None` disables clipping.
    pub clip_value: Option<f64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 512,
            max_epochs: 600,
            patience: 80,
            clip_value: None,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.learning_rate > 0.0) {
            return Err(NetError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(NetError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(NetError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if self.patience > self.max_epochs {
            return Err(NetError::InvalidConfig(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if let Some(c) = self.clip_value {
            if !(c > 0.0) {
                return Err(NetError::InvalidConfig("clip_value must be positive".into()));
            }
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(NetError::InvalidConfig(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(NetError::InvalidConfig("adam_eps must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch record: mean training loss over minibatches (weighted by batch
/// size) and full-set validation loss in eval mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Trained parameters (best validation epoch) plus the loss history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Trains from scratch: initializes per `model_cfg.seed`, loops epochs with
/// a seeded reshuffle each time, and returns the parameters of the best
/// validation epoch.
pub fn train<L: Loss>(
    model_cfg: &MlpConfig,
    train_cfg: &TrainConfig,
    train_features: &Array2<f64>,
    train_targets: &Array2<f64>,
    val_features: &Array2<f64>,
    val_targets: &Array2<f64>,
    loss_fn: &L,
) -> Result<TrainOutcome, NetError> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    if train_features.nrows() == 0 {
        return Err(NetError::EmptySet("training"));
    }
    if val_features.nrows() == 0 {
        return Err(NetError::EmptySet("validation"));
    }
    if loss_fn.output_units() != model_cfg.output_units {
        return Err(NetError::ShapeMismatch(format!(
            "loss expects {} output units, network produces {}",
            loss_fn.output_units(),
            model_cfg.output_units
        )));
    }

    let mut params = init_params(model_cfg)?;
    let mut adam = Adam::new(train_cfg, &params);
    let n = train_features.nrows();
    let n_batches = n.div_ceil(train_cfg.batch_size);

    let mut best_params = params.clone();
    let mut best_val_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut epochs_without_improvement = 0usize;
    let mut history = Vec::new();

    let mut indices: Vec<usize> = (0..n).collect();
    for epoch in 0..train_cfg.max_epochs {
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(train_cfg.seed, "epoch-shuffle", epoch as u64));
        indices.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for (batch_index, chunk) in indices.chunks(train_cfg.batch_size).enumerate() {
            let batch = train_features.select(Axis(0), chunk);
            let targets = train_targets.select(Axis(0), chunk);
            let mask_seed = derive_seed(
                train_cfg.seed,
                "dropout-mask",
                (epoch * n_batches + batch_index) as u64,
            );
            let (mut grads, loss) = backward(
                &params,
                model_cfg,
                &batch,
                &targets,
                loss_fn,
                ForwardMode::Stochastic { mask_seed },
            )
            .map_err(|e| NetError::Diverged {
                epoch,
                batch: batch_index,
                source: Box::new(e),
            })?;
            if let Some(clip) = train_cfg.clip_value {
                clip_gradients(&mut grads, clip);
            }
            adam.step(&mut params, &grads);
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / n as f64;

        let (val_raw, _) = forward(&params, model_cfg, val_features, ForwardMode::Eval)?;
        let val_loss = loss_fn
            .loss(&val_raw, val_targets)
            .map_err(|e| NetError::ValidationFailed { epoch, source: Box::new(e) })?;
        history.push(EpochStats { epoch, train_loss, val_loss });

        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_params = params.clone();
            best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= train_cfg.patience.max(1) {
                break;
            }
        }
    }

    Ok(TrainOutcome { params: best_params, history, best_epoch, best_val_loss })
}
