use super::backprop::Gradients;
use crate::error::{domain, Result};
use crate::network::{LayerWeights, ModelWeights};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for every trainable parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first: Vec<LayerWeights>,
    pub second: Vec<LayerWeights>,
    pub step: u64,
}

impl AdamState {
    pub fn new(weights: &ModelWeights) -> Self {
        let zeros = Gradients::zeros_like(weights).layers;
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    fn matches(&self, weights: &ModelWeights, grads: &Gradients) -> bool {
        let shape = |ls: &[LayerWeights]| -> Vec<(usize, usize)> {
            ls.iter().map(|l| (l.kernels.len(), l.biases.len())).collect()
        };
        let w = shape(&weights.layers);
        w == shape(&self.first) && w == shape(&self.second) && w == shape(&grads.layers)
    }

    /// Bias-corrected Adam update applied in place.
    pub fn update(&mut self, weights: &mut ModelWeights, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
        if !self.matches(weights, grads) {
            return domain("adam: state, weights and gradients have different shapes");
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (((p, g), m), v) in weights
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let params = p.kernels.iter_mut().chain(p.biases.iter_mut());
            let gs = g.kernels.iter().chain(&g.biases);
            let ms = m.kernels.iter_mut().chain(m.biases.iter_mut());
            let vs = v.kernels.iter_mut().chain(v.biases.iter_mut());
            for (((p, &g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *p -= cfg.lr * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
            }
        }
        Ok(())
    }
}

/// One optimizer step returning the updated weights and state.
pub fn adam_step(
    weights: &ModelWeights,
    state: &AdamState,
    grads: &Gradients,
    cfg: &AdamConfig,
) -> Result<(ModelWeights, AdamState)> {
    let mut w = weights.clone();
    let mut s = state.clone();
    s.update(&mut w, grads, cfg)?;
    Ok((w, s))
}
