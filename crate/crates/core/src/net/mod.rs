//! Minimal reverse-mode feedforward engine: dense layers, ReLU, inverted
//! dropout, Adam, element-wise gradient clipping and early stopping.
//!
//! The network maps a feature batch through `V` hidden layers (affine →
//! ReLU → optional dropout) and a final affine layer to unconstrained raw
//! outputs; output constraints and the training criterion live in
//! [`crate::mdn`] and reach this module through the [`Loss`] trait. All
//! mathematics is 64-bit and every stochastic choice (initialization,
//! shuffling, dropout masks) is seeded, so a training run is
//! bit-reproducible.

mod adam;
mod train;

pub use adam::{clip_gradients, Adam};
pub use train::{train, EpochStats, TrainConfig, TrainOutcome};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite loss at batch row {row}")]
    NonFiniteLoss { row: usize },
    #[error("training diverged at epoch {epoch}, batch {batch}: {source}")]
    Diverged {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<NetError>,
    },
    #[error("validation loss failed at epoch {epoch}: {source}")]
    ValidationFailed {
        epoch: usize,
        #[source]
        source: Box<NetError>,
    },
    #[error("{0} set is empty")]
    EmptySet(&'static str),
}

/// Training criterion over raw network outputs.
///
/// `loss` and `loss_and_grad` both return the mean over batch rows;
/// the gradient is taken with respect to every raw output entry.
pub trait Loss: Sync {
    fn output_units(&self) -> usize;
    fn loss(&self, raw: &Array2<f64>, targets: &Array2<f64>) -> Result<f64, NetError>;
    fn loss_and_grad(
        &self,
        raw: &Array2<f64>,
        targets: &Array2<f64>,
    ) -> Result<(f64, Array2<f64>), NetError>;
}

/// Architecture description: layer widths, dropout placement and
/// initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_units: usize,
    /// Drop probability Φ for units in the configured hidden layers.
    pub dropout_rate: f64,
    /// 1-based hidden-layer indices after which dropout applies.
    pub dropout_layers: Vec<usize>,
    pub init_std: f64,
    pub seed: u64,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_dim == 0 {
            return Err(NetError::InvalidConfig("input_dim must be positive".into()));
        }
        if self.output_units == 0 {
            return Err(NetError::InvalidConfig("output_units must be positive".into()));
        }
        if self.hidden_widths.iter().any(|w| *w == 0) {
            return Err(NetError::InvalidConfig("hidden widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetError::InvalidConfig(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if let Some(bad) = self
            .dropout_layers
            .iter()
            .find(|l| **l == 0 || **l > self.hidden_widths.len())
        {
            return Err(NetError::InvalidConfig(format!(
                "dropout layer {bad} outside 1..={}",
                self.hidden_widths.len()
            )));
        }
        if !(self.init_std > 0.0) {
            return Err(NetError::InvalidConfig("init_std must be positive".into()));
        }
        Ok(())
    }

    /// Per-layer (fan_in, fan_out) pairs, hidden layers then output layer.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut fan_in = self.input_dim;
        for w in &self.hidden_widths {
            dims.push((fan_in, *w));
            fan_in = *w;
        }
        dims.push((fan_in, self.output_units));
        dims
    }

    fn applies_dropout_after(&self, hidden_index_one_based: usize) -> bool {
        self.dropout_rate > 0.0 && self.dropout_layers.contains(&hidden_index_one_based)
    }
}

/// Per-layer weight matrices (`fan_in x fan_out`) and bias vectors. The
/// same structure carries gradients and Adam moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl ModelParams {
    pub fn zeros_like(other: &ModelParams) -> Self {
        Self {
            weights: other.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: other.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Flattens all parameters in declared layer order, each layer's weight
    /// matrix row-major followed by its bias vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            flat.extend(w.iter());
            flat.extend(b.iter());
        }
        flat
    }

    /// Rebuilds parameters from [`Self::to_flat`] output for the given
    /// architecture.
    pub fn from_flat(cfg: &MlpConfig, flat: &[f64]) -> Result<Self, NetError> {
        let dims = cfg.layer_dims();
        let expected: usize = dims.iter().map(|(i, o)| i * o + o).sum();
        if flat.len() != expected {
            return Err(NetError::ShapeMismatch(format!(
                "flat parameter vector has {} entries, architecture needs {}",
                flat.len(),
                expected
            )));
        }
        let mut weights = Vec::with_capacity(dims.len());
        let mut biases = Vec::with_capacity(dims.len());
        let mut cursor = 0;
        for (fan_in, fan_out) in dims {
            let w_len = fan_in * fan_out;
            let w = Array2::from_shape_vec((fan_in, fan_out), flat[cursor..cursor + w_len].to_vec())
                .expect("length checked above");
            cursor += w_len;
            let b = Array1::from_vec(flat[cursor..cursor + fan_out].to_vec());
            cursor += fan_out;
            weights.push(w);
            biases.push(b);
        }
        Ok(Self { weights, biases })
    }

    fn check_architecture(&self, cfg: &MlpConfig) -> Result<(), NetError> {
        let dims = cfg.layer_dims();
        if self.weights.len() != dims.len() || self.biases.len() != dims.len() {
            return Err(NetError::ShapeMismatch(format!(
                "parameter set has {} layers, architecture needs {}",
                self.weights.len(),
                dims.len()
            )));
        }
        for (l, ((fan_in, fan_out), (w, b))) in
            dims.iter().zip(self.weights.iter().zip(&self.biases)).enumerate()
        {
            if w.dim() != (*fan_in, *fan_out) || b.len() != *fan_out {
                return Err(NetError::ShapeMismatch(format!(
                    "layer {l}: weights {:?} / bias {} vs expected ({fan_in}, {fan_out})",
                    w.dim(),
                    b.len()
                )));
            }
        }
        Ok(())
    }
}

/// Draws weights i.i.d. from N(0, init_std²) and zeroes all biases,
/// deterministically per config seed.
pub fn init_params(cfg: &MlpConfig) -> Result<ModelParams, NetError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.init_std).expect("validated std");
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (fan_in, fan_out) in cfg.layer_dims() {
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| normal.sample(&mut rng));
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    Ok(ModelParams { weights, biases })
}

/// Forward-pass behaviour.
///
/// `Eval` applies no dropout. `Stochastic` applies inverted dropout after
/// the configured hidden layers with masks drawn from `mask_seed`; training
/// batches and MC-dropout inference passes both use this variant, differing
/// only in how they derive the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Eval,
    Stochastic { mask_seed: u64 },
}

/// Intermediate activations retained for the backward pass.
pub struct ForwardCache {
    /// `layer_inputs[l]` is the input fed to layer `l`; index 0 is the batch.
    layer_inputs: Vec<Array2<f64>>,
    /// ReLU derivative masks per hidden layer (1.0 where pre-activation > 0).
    relu_masks: Vec<Array2<f64>>,
    /// Inverted-dropout masks per hidden layer; `None` when not applied.
    dropout_masks: Vec<Option<Array2<f64>>>,
}

/// Runs the network over a batch, returning raw outputs (`batch x 5K`) and
/// the cache needed by [`backward`].
pub fn forward(
    params: &ModelParams,
    cfg: &MlpConfig,
    batch: &Array2<f64>,
    mode: ForwardMode,
) -> Result<(Array2<f64>, ForwardCache), NetError> {
    params.check_architecture(cfg)?;
    if batch.ncols() != cfg.input_dim {
        return Err(NetError::ShapeMismatch(format!(
            "batch has {} features, network expects {}",
            batch.ncols(),
            cfg.input_dim
        )));
    }
    let n_hidden = cfg.hidden_widths.len();
    let keep = 1.0 - cfg.dropout_rate;
    let mut mask_rng = match mode {
        ForwardMode::Stochastic { mask_seed } => Some(ChaCha8Rng::seed_from_u64(mask_seed)),
        ForwardMode::Eval => None,
    };

    let mut layer_inputs = Vec::with_capacity(n_hidden + 1);
    let mut relu_masks = Vec::with_capacity(n_hidden);
    let mut dropout_masks = Vec::with_capacity(n_hidden);

    let mut activation = batch.clone();
    for l in 0..n_hidden {
        let mut z = activation.dot(&params.weights[l]);
        z += &params.biases[l];
        let relu_mask = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let mut out = z * &relu_mask;
        let dropout_mask = match (&mut mask_rng, cfg.applies_dropout_after(l + 1)) {
            (Some(rng), true) => {
                let mask = Array2::from_shape_fn(out.raw_dim(), |_| {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                out *= &mask;
                Some(mask)
            }
            _ => None,
        };
        layer_inputs.push(activation);
        relu_masks.push(relu_mask);
        dropout_masks.push(dropout_mask);
        activation = out;
    }
    let mut raw = activation.dot(&params.weights[n_hidden]);
    raw += &params.biases[n_hidden];
    layer_inputs.push(activation);

    Ok((raw, ForwardCache { layer_inputs, relu_masks, dropout_masks }))
}

/// One forward/backward pass: exact reverse-mode gradients of the mean
/// batch loss for every parameter, plus the scalar loss.
pub fn backward<L: Loss>(
    params: &ModelParams,
    cfg: &MlpConfig,
    batch: &Array2<f64>,
    targets: &Array2<f64>,
    loss_fn: &L,
    mode: ForwardMode,
) -> Result<(ModelParams, f64), NetError> {
    let (raw, cache) = forward(params, cfg, batch, mode)?;
    let (loss, grad_raw) = loss_fn.loss_and_grad(&raw, targets)?;

    let n_layers = params.weights.len();
    let mut grads = ModelParams::zeros_like(params);
    let mut delta = grad_raw;
    for l in (0..n_layers).rev() {
        grads.weights[l] = cache.layer_inputs[l].t().dot(&delta);
        grads.biases[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut upstream = delta.dot(&params.weights[l].t());
            if let Some(mask) = &cache.dropout_masks[l - 1] {
                upstream *= mask;
            }
            upstream *= &cache.relu_masks[l - 1];
            delta = upstream;
        }
    }
    Ok((grads, loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdn::{MdnHead, MdnLoss};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn small_cfg(seed: u64) -> MlpConfig {
        MlpConfig {
            input_dim: 4,
            hidden_widths: vec![6, 5],
            output_units: 15,
            dropout_rate: 0.0,
            dropout_layers: vec![],
            init_std: 0.1,
            seed,
        }
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let cfg = small_cfg(9);
        let a = init_params(&cfg).unwrap();
        let b = init_params(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.biases.iter().all(|b| b.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn init_sample_variance_matches_configured_std() {
        let cfg = MlpConfig {
            input_dim: 512,
            hidden_widths: vec![256],
            output_units: 15,
            dropout_rate: 0.0,
            dropout_layers: vec![],
            init_std: 0.1,
            seed: 3,
        };
        let params = init_params(&cfg).unwrap();
        let w = &params.weights[0];
        let mean = w.mean().unwrap();
        let var = w.mapv(|v| (v - mean) * (v - mean)).mean().unwrap();
        assert!((0.008..=0.012).contains(&var), "sample variance {var}");
    }

    #[test]
    fn zero_input_zero_weights_give_zero_output() {
        let cfg = small_cfg(1);
        let params = ModelParams {
            weights: cfg.layer_dims().iter().map(|(i, o)| Array2::zeros((*i, *o))).collect(),
            biases: cfg.layer_dims().iter().map(|(_, o)| Array1::zeros(*o)).collect(),
        };
        let batch = Array2::zeros((3, 4));
        let (raw, _) = forward(&params, &cfg, &batch, ForwardMode::Eval).unwrap();
        assert!(raw.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_dropout_makes_stochastic_and_eval_agree() {
        let cfg = small_cfg(2);
        let params = init_params(&cfg).unwrap();
        let batch = Array2::from_shape_fn((5, 4), |(i, j)| (i + j) as f64 * 0.1 - 0.4);
        let (eval, _) = forward(&params, &cfg, &batch, ForwardMode::Eval).unwrap();
        let (stoch, _) =
            forward(&params, &cfg, &batch, ForwardMode::Stochastic { mask_seed: 77 }).unwrap();
        assert_eq!(eval, stoch);
    }

    #[test]
    fn fixed_mask_seed_reproduces_stochastic_output() {
        let mut cfg = small_cfg(4);
        cfg.dropout_rate = 0.4;
        cfg.dropout_layers = vec![1, 2];
        let params = init_params(&cfg).unwrap();
        let batch = Array2::from_shape_fn((2, 4), |(i, j)| i as f64 - j as f64 * 0.3);
        let mode = ForwardMode::Stochastic { mask_seed: 123 };
        let (a, _) = forward(&params, &cfg, &batch, mode).unwrap();
        let (b, _) = forward(&params, &cfg, &batch, mode).unwrap();
        assert_eq!(a, b);
        let (c, _) =
            forward(&params, &cfg, &batch, ForwardMode::Stochastic { mask_seed: 124 }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn inverted_dropout_preserves_expected_output() {
        let cfg = MlpConfig {
            input_dim: 3,
            hidden_widths: vec![8],
            output_units: 4,
            dropout_rate: 0.3,
            dropout_layers: vec![1],
            init_std: 0.1,
            seed: 5,
        };
        let params = init_params(&cfg).unwrap();
        let batch = Array2::from_shape_fn((1, 3), |(_, j)| j as f64 + 0.5);
        let (eval, _) = forward(&params, &cfg, &batch, ForwardMode::Eval).unwrap();
        let passes = 20_000;
        let mut mean = Array2::zeros(eval.raw_dim());
        for s in 0..passes {
            let (out, _) =
                forward(&params, &cfg, &batch, ForwardMode::Stochastic { mask_seed: s }).unwrap();
            mean += &out;
        }
        mean /= passes as f64;
        for (m, e) in mean.iter().zip(eval.iter()) {
            // Invariant: averaged stochastic output approaches the eval
            // output; 2% of the output scale.
            assert!((m - e).abs() <= 0.02 * e.abs().max(0.05), "mean {m} vs eval {e}");
        }
    }

    #[test]
    fn gradients_match_finite_differences_on_random_small_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let head = MdnHead::new(3);
        let loss = MdnLoss::new(head);
        for net_index in 0..6 {
            let cfg = MlpConfig {
                input_dim: rng.random_range(2..5),
                hidden_widths: vec![rng.random_range(3..9), rng.random_range(3..9)],
                output_units: head.output_units(),
                dropout_rate: 0.0,
                dropout_layers: vec![],
                init_std: 0.4,
                seed: 100 + net_index,
            };
            let params = init_params(&cfg).unwrap();
            let n = 3;
            let batch = Array2::from_shape_fn((n, cfg.input_dim), |_| rng.random_range(-1.0..1.0));
            let targets = Array2::from_shape_fn((n, 2), |_| rng.random_range(0.0..1.0));
            let (grads, _) =
                backward(&params, &cfg, &batch, &targets, &loss, ForwardMode::Eval).unwrap();

            let flat = params.to_flat();
            let analytic = grads.to_flat();
            for i in 0..flat.len() {
                let h = 1e-4;
                let mut plus = flat.clone();
                plus[i] += h;
                let mut minus = flat.clone();
                minus[i] -= h;
                let loss_at = |flat_params: &[f64]| {
                    let p = ModelParams::from_flat(&cfg, flat_params).unwrap();
                    let (raw, _) = forward(&p, &cfg, &batch, ForwardMode::Eval).unwrap();
                    loss.loss(&raw, &targets).unwrap()
                };
                let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                let denominator = analytic[i].abs().max(fd.abs()).max(1e-6);
                assert!(
                    ((analytic[i] - fd) / denominator).abs() < 1e-4,
                    "net {net_index} param {i}: analytic {} vs fd {fd}",
                    analytic[i]
                );
            }
        }
    }

    #[test]
    fn mean_mixture_gradient_vanishes_at_target() {
        // Single affine layer steered so the mean outputs equal the target;
        // the gradient of the Gaussian NLL w.r.t. the mean is (mu - x)/sigma^2,
        // so every parameter feeding the mean outputs must have zero gradient.
        let head = MdnHead::new(1);
        let loss = MdnLoss::new(head);
        let cfg = MlpConfig {
            input_dim: 2,
            hidden_widths: vec![],
            output_units: 5,
            dropout_rate: 0.0,
            dropout_layers: vec![],
            init_std: 0.1,
            seed: 0,
        };
        let target = [0.4, -0.7];
        let mut weights = Array2::zeros((2, 5));
        weights[[0, 1]] = target[0];
        weights[[0, 2]] = target[1];
        weights[[1, 3]] = 2.0;
        weights[[1, 4]] = 2.0;
        let params = ModelParams { weights: vec![weights], biases: vec![Array1::zeros(5)] };
        let batch = Array2::from_shape_vec((1, 2), vec![1.0, 1.0]).unwrap();
        let targets = Array2::from_shape_vec((1, 2), target.to_vec()).unwrap();
        let (grads, _) =
            backward(&params, &cfg, &batch, &targets, &loss, ForwardMode::Eval).unwrap();
        for row in 0..2 {
            for col in [1, 2] {
                assert_relative_eq!(grads.weights[0][[row, col]], 0.0, epsilon = 1e-12);
            }
        }
        assert_relative_eq!(grads.biases[0][1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(grads.biases[0][2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_batch_leaves_mean_gradient_unchanged() {
        let cfg = small_cfg(7);
        let params = init_params(&cfg).unwrap();
        let loss = MdnLoss::new(MdnHead::new(3));
        let batch = Array2::from_shape_fn((2, 4), |(i, j)| 0.3 * i as f64 - 0.2 * j as f64);
        let targets = Array2::from_shape_fn((2, 2), |(i, _)| i as f64 * 0.5);
        let doubled_batch = ndarray::concatenate![Axis(0), batch, batch];
        let doubled_targets = ndarray::concatenate![Axis(0), targets, targets];
        let (g1, l1) =
            backward(&params, &cfg, &batch, &targets, &loss, ForwardMode::Eval).unwrap();
        let (g2, l2) = backward(
            &params,
            &cfg,
            &doubled_batch,
            &doubled_targets,
            &loss,
            ForwardMode::Eval,
        )
        .unwrap();
        assert_relative_eq!(l1, l2, epsilon = 1e-12);
        for (a, b) in g1.to_flat().iter().zip(g2.to_flat()) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn flat_round_trip_preserves_params() {
        let cfg = small_cfg(13);
        let params = init_params(&cfg).unwrap();
        let rebuilt = ModelParams::from_flat(&cfg, &params.to_flat()).unwrap();
        assert_eq!(params, rebuilt);
        assert!(ModelParams::from_flat(&cfg, &[0.0; 3]).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_settings() {
        let mut cfg = small_cfg(0);
        cfg.dropout_rate = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(0);
        cfg.dropout_layers = vec![3];
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(0);
        cfg.init_std = 0.0;
        assert!(cfg.validate().is_err());
    }
}
