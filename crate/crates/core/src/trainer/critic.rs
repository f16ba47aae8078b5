use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::approx::{Adam, AdamState, Architecture, Head};
use crate::error::{Error, Result};

/// Backward lambda-return sweep over one episode.
///
/// `next_values[t]` is the target critic's value of the successor of step `t`
/// (zero after a terminal step). Then
/// `G_t = r_t + gamma ((1 - lambda) V_{t+1} + lambda G_{t+1})`, with the last step
/// bootstrapping from `V_{T+1}` alone.
pub fn td_lambda_targets(
    rewards: &[f64],
    next_values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    if rewards.len() != next_values.len() {
        return Err(Error::Shape {
            expected: rewards.len(),
            got: next_values.len(),
        });
    }
    let n = rewards.len();
    let mut g = vec![0.0; n];
    let mut next_return = None;
    for t in (0..n).rev() {
        let v = next_values[t];
        let tail = match next_return {
            Some(gn) => (1.0 - lambda) * v + lambda * gn,
            None => v,
        };
        g[t] = rewards[t] + gamma * tail;
        next_return = Some(g[t]);
    }
    Ok(g)
}

/// A value head with a target copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub head: Head,
    pub target: Head,
    pub opt: AdamState,
    pub updates: u64,
}

impl Critic {
    pub fn new(arch: Architecture, inputs: usize, rng: &mut impl RngCore) -> Self {
        let head = Head::init(arch, inputs, 1, rng);
        let opt = AdamState::new(head.param_len());
        Critic {
            target: head.clone(),
            head,
            opt,
            updates: 0,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.head.output(x)?[0])
    }

    pub fn target_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.target.output(x)?[0])
    }

    /// Gradient of the mean squared error `mean (V(x) - y)^2` and the loss.
    pub fn loss_grad(&self, inputs: &[Vec<f64>], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.head.param_len()];
        let n = inputs.len().max(1) as f64;
        let mut loss = 0.0;
        for (x, &y) in inputs.iter().zip(targets) {
            let (out, trace) = self.head.output_traced(x)?;
            let err = out[0] - y;
            loss += err * err / n;
            self.head
                .accumulate_grad_traced(x, &trace, &[2.0 * err / n], &mut grad)?;
        }
        Ok((loss, grad))
    }

    /// One full-batch regression step; copies into the target every
    /// `target_interval` updates. Returns the pre-step loss.
    pub fn update(
        &mut self,
        adam: &Adam,
        inputs: &[Vec<f64>],
        targets: &[f64],
        target_interval: u64,
    ) -> Result<f64> {
        let (loss, grad) = self.loss_grad(inputs, targets)?;
        adam.step(&mut self.head.params, &grad, &mut self.opt)?;
        self.updates += 1;
        if self.updates.is_multiple_of(target_interval) {
            self.target.params.clone_from(&self.head.params);
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{keyed_stream, Domain};

    #[test]
    fn hand_trajectory() {
        let g = td_lambda_targets(&[0.0, 0.0, 1.0], &[0.0; 3], 0.9, 0.8).unwrap();
        for (a, b) in g.iter().zip([0.5184, 0.72, 1.0]) {
            assert!((a - b).abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn lambda_edges() {
        let r = [0.5, -1.0, 2.0];
        let v = [0.1, 0.2, 0.0];
        let td0 = td_lambda_targets(&r, &v, 0.9, 0.0).unwrap();
        for t in 0..3 {
            assert!((td0[t] - (r[t] + 0.9 * v[t])).abs() < 1e-12);
        }
        let mc = td_lambda_targets(&r, &v, 1.0, 1.0).unwrap();
        assert_eq!(mc, vec![1.5, 1.0, 2.0]);
        assert!(td_lambda_targets(&r, &v[..2], 0.9, 0.5).is_err());
    }

    #[test]
    fn target_copy_cadence() {
        let mut rng = keyed_stream(Domain::Verification, 0, 0, 0);
        let mut c = Critic::new(Architecture::Linear, 2, &mut rng);
        let adam = Adam {
            lr: 0.1,
            ..Adam::default()
        };
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let ys = [1.0, -1.0];
        for i in 1..=5 {
            c.update(&adam, &xs, &ys, 3).unwrap();
            if i == 3 {
                assert_eq!(c.target, c.head);
            } else {
                assert_ne!(c.target, c.head);
            }
        }
    }

    #[test]
    fn regression_converges() {
        let mut rng = keyed_stream(Domain::Verification, 1, 0, 0);
        let mut c = Critic::new(Architecture::Linear, 2, &mut rng);
        let adam = Adam {
            lr: 0.05,
            ..Adam::default()
        };
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let ys = [0.7, -0.2];
        let mut loss = f64::INFINITY;
        for _ in 0..2000 {
            loss = c.update(&adam, &xs, &ys, 200).unwrap();
        }
        assert!(loss < 1e-8, "{loss}");
    }
}
