//! Bias-corrected Adam over a flat parameter vector.

use serde::{Deserialize, Serialize};

use super::NetError;

/// Optimizer state: first/second moment accumulators plus hyperparameters.
/// Defaults are the conventional beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Learning-rate schedule hook: swap the rate between epochs.
    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    /// One bias-corrected update, applied in place.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NetError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NetError::DimensionMismatch {
                what: "adam parameter/gradient vector",
                expected: self.m.len(),
                actual: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for idx in 0..params.len() {
            let g = grads[idx];
            self.m[idx] = self.beta1 * self.m[idx] + (1.0 - self.beta1) * g;
            self.v[idx] = self.beta2 * self.v[idx] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[idx] / bc1;
            let v_hat = self.v[idx] / bc2;
            params[idx] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With g = 1 the bias-corrected moments are both exactly 1, so the
        // first update is lr / (1 + eps).
        let mut state = AdamState::new(1, 0.1);
        let mut params = vec![1.0];
        state.update(&mut params, &[1.0]).unwrap();
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((params[0] - expected).abs() < 1e-15);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut state = AdamState::new(2, 0.1);
        let mut params = vec![0.0; 3];
        assert!(state.update(&mut params, &[0.0; 2]).is_err());
    }

    #[test]
    fn descends_a_quadratic() {
        // Minimize (p - 3)^2 from 0; Adam with default moments should get
        // close within a few hundred steps at lr 0.05.
        let mut state = AdamState::new(1, 0.05);
        let mut params = vec![0.0];
        for _ in 0..500 {
            let g = 2.0 * (params[0] - 3.0);
            state.update(&mut params, &[g]).unwrap();
        }
        assert!((params[0] - 3.0).abs() < 0.05);
    }
}
