//! Adam optimizer with bias-corrected moments, plus element-wise gradient
//! clipping.

use super::{ModelParams, TrainConfig};

/// Clamps every gradient entry to `[-clip_value, +clip_value]` in place.
pub fn clip_gradients(grads: &mut ModelParams, clip_value: f64) {
    let clamp = |g: f64| g.clamp(-clip_value, clip_value);
    for w in &mut grads.weights {
        w.mapv_inplace(clamp);
    }
    for b in &mut grads.biases {
        b.mapv_inplace(clamp);
    }
}

/// Standard Adam state: first/second moment accumulators and step counter.
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: ModelParams,
    v: ModelParams,
    step_index: u64,
}

impl Adam {
    pub fn new(cfg: &TrainConfig, like: &ModelParams) -> Self {
        Self {
            learning_rate: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            m: ModelParams::zeros_like(like),
            v: ModelParams::zeros_like(like),
            step_index: 0,
        }
    }

    /// Applies one bias-corrected Adam update in place.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step_index += 1;
        let t = self.step_index as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);

        let update = |param: &mut f64, grad: f64, m: &mut f64, v: &mut f64| {
            *m = self.beta1 * *m + (1.0 - self.beta1) * grad;
            *v = self.beta2 * *v + (1.0 - self.beta2) * grad * grad;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *param -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        };
        for l in 0..params.weights.len() {
            for ((p, g), (m, v)) in params.weights[l]
                .iter_mut()
                .zip(grads.weights[l].iter())
                .zip(self.m.weights[l].iter_mut().zip(self.v.weights[l].iter_mut()))
            {
                update(p, *g, m, v);
            }
            for ((p, g), (m, v)) in params.biases[l]
                .iter_mut()
                .zip(grads.biases[l].iter())
                .zip(self.m.biases[l].iter_mut().zip(self.v.biases[l].iter_mut()))
            {
                update(p, *g, m, v);
            }
        }
    }
}
