use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Real;

use super::model::{Gradients, Model};

/// Mini-batch SGD schedule. Iterations count optimizer steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Global L2-norm bound on the batch gradient; `None` disables clipping.
    pub clip: Option<f64>,
    pub batch_size: usize,
    pub iterations: usize,
    /// The learning rate halves every this many iterations.
    pub halving_interval: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Spectrogram-model recipe, shared by the digit and gender tasks.
    pub fn alexnet_full() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            momentum: 0.9,
            clip: Some(5.0),
            batch_size: 100,
            iterations: 10_000,
            halving_interval: 2_500,
            seed: 0,
        }
    }

    /// Raw-waveform digit recipe.
    pub fn audionet_digit_full() -> Self {
        TrainConfig {
            learning_rate: 0.0001,
            momentum: 0.9,
            clip: None,
            batch_size: 100,
            iterations: 50_000,
            halving_interval: 10_000,
            seed: 0,
        }
    }

    /// Raw-waveform gender recipe.
    pub fn audionet_gender_full() -> Self {
        TrainConfig {
            iterations: 10_000,
            halving_interval: 5_000,
            ..Self::audionet_digit_full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return bad("clip magnitude must be > 0");
            }
        }
        if self.halving_interval == 0 {
            return bad("halving interval must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch size must be > 0");
        }
        Ok(())
    }

    /// `lr0 · 0.5^⌊iteration / halving_interval⌋`
    pub fn learning_rate_at(&self, iteration: usize) -> f64 {
        let halvings = (iteration / self.halving_interval).min(1074) as i32;
        self.learning_rate * 0.5f64.powi(halvings)
    }
}

/// Momentum SGD: `v ← μ·v − lr·clip(g)`, `p ← p + v`.
#[derive(Debug, Clone)]
pub struct Sgd<F> {
    config: TrainConfig,
    velocity: Option<Gradients<F>>,
}

impl<F: Real> Sgd<F> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Sgd {
            config,
            velocity: None,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Scale factor that brings `norm` within the clip bound.
    pub fn clip_factor(&self, norm: f64) -> f64 {
        match self.config.clip {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        }
    }

    /// Applies one update for `iteration` (0-based). Returns the gradient
    /// norm before clipping.
    pub fn step(&mut self, model: &mut Model<F>, grads: &Gradients<F>, iteration: usize) -> Result<f64> {
        let shapes_match = model.params().len() == grads.layers.len()
            && model.params().iter().zip(&grads.layers).all(|(p, g)| {
                p.weight.as_ref().map(|t| t.shape()) == g.weight.as_ref().map(|t| t.shape())
                    && p.bias.as_ref().map(|t| t.shape()) == g.bias.as_ref().map(|t| t.shape())
            });
        if !shapes_match {
            return Err(Error::Shape("gradient layout does not match parameters".into()));
        }
        let norm = grads.l2_norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        let scale = F::from_f64_lossy(self.config.learning_rate_at(iteration) * self.clip_factor(norm));
        let momentum = F::from_f64_lossy(self.config.momentum);
        let velocity = self
            .velocity
            .get_or_insert_with(|| Gradients::zeros_like(model));
        let params = model
            .params_mut()
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()));
        for ((p, v), g) in params.zip(velocity.tensors_mut()).zip(grads.tensors()) {
            for ((p, v), &g) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                *v = momentum * *v - scale * g;
                *p += *v;
            }
        }
        Ok(norm)
    }
}
