//! SGD and Adam parameter updates.

use crate::error::{Error, Result};
use crate::nn::{Autoencoder, GradientTape};

/// Adam state over a flat parameter vector. Also used directly by the mask
/// optimization in shift explanation.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, param_count: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Bias-corrected Adam update over parameters in a fixed order.
    pub fn step<'a>(
        &mut self,
        params: impl Iterator<Item = &'a mut f64>,
        grads: impl Iterator<Item = f64>,
    ) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut count = 0;
        for (idx, (p, g)) in params.zip(grads).enumerate() {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            count += 1;
        }
        debug_assert_eq!(count, self.m.len());
    }
}

/// Optimizer for the autoencoder. Rejects steps on non-finite gradients,
/// naming the offending parameter.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { learning_rate: f64, steps: u64 },
    Adam(Adam),
}

impl Optimizer {
    pub fn sgd(learning_rate: f64) -> Self {
        Optimizer::Sgd {
            learning_rate,
            steps: 0,
        }
    }

    pub fn adam(learning_rate: f64, model: &Autoencoder) -> Self {
        Optimizer::Adam(Adam::new(learning_rate, model.param_count()))
    }

    pub fn step_count(&self) -> u64 {
        match self {
            Optimizer::Sgd { steps, .. } => *steps,
            Optimizer::Adam(adam) => adam.step_count(),
        }
    }

    /// Applies one update from the tape to the model.
    pub fn step(&mut self, model: &mut Autoencoder, tape: &GradientTape) -> Result<()> {
        if let Some(path) = tape.find_non_finite() {
            return Err(Error::NonFiniteGradient { path });
        }
        match self {
            Optimizer::Sgd {
                learning_rate,
                steps,
            } => {
                for (p, g) in model.params_mut().zip(tape.values()) {
                    *p -= *learning_rate * g;
                }
                *steps += 1;
            }
            Optimizer::Adam(adam) => adam.step(model.params_mut(), tape.values()),
        }
        Ok(())
    }
}
