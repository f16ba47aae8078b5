use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 0.0005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

impl Adam {
    /// One bias-corrected descent step on `params` along `grads`.
    pub fn step(&self, params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
        if grads.len() != params.len() || state.m.len() != params.len() {
            return Err(Error::Shape {
                expected: params.len(),
                got: grads.len(),
            });
        }
        state.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, state.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, state.t as f64);
        for i in 0..params.len() {
            let g = grads[i];
            state.m[i] = self.beta1 * state.m[i] + (1.0 - self.beta1) * g;
            state.v[i] = self.beta2 * state.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = state.m[i] / c1;
            let v_hat = state.v[i] / c2;
            params[i] -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let adam = Adam::default();
        let mut p = vec![0.3, -1.0];
        let mut s = AdamState::new(2);
        for _ in 0..5 {
            adam.step(&mut p, &[0.0, 0.0], &mut s).unwrap();
        }
        assert_eq!(p, vec![0.3, -1.0]);
    }

    #[test]
    fn first_step_is_normalised() {
        let adam = Adam::default();
        let g = [0.02, -3.0, 1e-9];
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        adam.step(&mut p, &g, &mut s).unwrap();
        for i in 0..3 {
            let expected = -adam.lr * g[i] / (g[i].abs() + adam.eps);
            assert!(
                (p[i] - expected).abs() < 1e-15,
                "{i}: {} vs {expected}",
                p[i]
            );
        }
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let adam = Adam {
            lr: 0.01,
            ..Adam::default()
        };
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = p[0];
            adam.step(&mut p, &[0.7], &mut s).unwrap();
            last = before - p[0];
        }
        assert!((last - 0.01).abs() < 1e-6, "{last}");
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(2);
        assert!(Adam::default()
            .step(&mut [0.0, 0.0], &[1.0], &mut s)
            .is_err());
    }
}
