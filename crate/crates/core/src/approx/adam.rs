use super::mlp::ParamVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Global L2 norm above which gradients are rescaled.
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-5,
            epsilon: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            clip_norm: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, param_count: usize) -> Self {
        Self {
            config,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
        }
    }

    /// Clips `grads` to the configured global norm, then applies one Adam
    /// update. Nothing is mutated when the gradient contains a non-finite
    /// entry. Returns the pre-clip gradient norm.
    pub fn step(&mut self, params: &mut ParamVector, grads: &[f64]) -> Result<f64> {
        let n = params.values.len();
        if grads.len() != n || self.first_moment.len() != n {
            return Err(Error::Shape {
                context: "optimizer step",
                expected: self.first_moment.len(),
                actual: grads.len().min(n),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i}")));
        }
        let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if norm > self.config.clip_norm {
            self.config.clip_norm / norm
        } else {
            1.0
        };
        let AdamConfig {
            learning_rate,
            epsilon,
            beta1,
            beta2,
            ..
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let moments = self.first_moment.iter_mut().zip(self.second_moment.iter_mut());
        for ((p, g), (m, v)) in params.values.iter_mut().zip(grads).zip(moments) {
            let g = g * scale;
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
        Ok(norm)
    }
}

/// Returns `grads` rescaled to at most `max_norm` in global L2 norm.
pub fn clip_global_norm(grads: &[f64], max_norm: f64) -> Vec<f64> {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        grads.iter().map(|g| g * max_norm / norm).collect()
    } else {
        grads.to_vec()
    }
}

/// `target ← decay·target + (1−decay)·online`, elementwise.
pub fn ema_update(target: &mut ParamVector, online: &ParamVector, decay: f64) -> Result<()> {
    if target.layout != online.layout {
        return Err(Error::Shape {
            context: "EMA parameter layout",
            expected: target.values.len(),
            actual: online.values.len(),
        });
    }
    for (t, o) in target.values.iter_mut().zip(&online.values) {
        *t = decay * *t + (1.0 - decay) * o;
    }
    Ok(())
}
