//! Differentiable function heads, exploration and optimisation.
//!
//! Heads map an input vector to logits (policies) or to a single value (critics).
//! Gradients are analytic; the finite-difference checks live in the tests.

mod adam;
mod head;

pub use adam::{Adam, AdamState};
pub use head::{Architecture, Head};

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::sampling::inverse_cdf;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// `(1 - eps) * softmax(logits) + eps * uniform`.
pub fn bounded_softmax(logits: &[f64], eps: f64) -> Vec<f64> {
    let n = logits.len() as f64;
    softmax(logits)
        .into_iter()
        .map(|p| (1.0 - eps) * p + eps / n)
        .collect()
}

/// Draws from the bounded softmax distribution with one uniform from `rng`.
pub fn bounded_softmax_sample(logits: &[f64], eps: f64, rng: &mut impl RngCore) -> usize {
    inverse_cdf(&bounded_softmax(logits, eps), rng.random::<f64>())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Linear annealing of the exploration rate over environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub start: f64,
    pub end: f64,
    pub horizon: u64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        ExplorationSchedule {
            start: 0.5,
            end: 0.01,
            horizon: 50_000,
        }
    }
}

impl ExplorationSchedule {
    pub fn epsilon(&self, env_steps: u64) -> f64 {
        if env_steps >= self.horizon {
            return self.end;
        }
        let frac = (env_steps as f64 / self.horizon as f64).min(1.0);
        let e = self.start + (self.end - self.start) * frac;
        e.clamp(self.end.min(self.start), self.start.max(self.end))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{keyed_stream, Domain};

    #[test]
    fn bounded_softmax_mixture() {
        let p = bounded_softmax(&[libm::log(3.0), 0.0], 0.5);
        assert!((p[0] - 0.625).abs() < 1e-12);
        assert!((p[1] - 0.375).abs() < 1e-12);
        let u = bounded_softmax(&[4.0, -2.0, 1.0], 1.0);
        assert!(u.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn bounded_sample_frequencies() {
        let mut rng = keyed_stream(Domain::Verification, 3, 0, 0);
        let n = 100_000;
        let mut hits = 0;
        for _ in 0..n {
            if bounded_softmax_sample(&[libm::log(3.0), 0.0], 0.5, &mut rng) == 0 {
                hits += 1;
            }
        }
        let f = hits as f64 / n as f64;
        let sigma = libm::sqrt(0.625 * 0.375 / n as f64);
        assert!((f - 0.625).abs() < 4.0 * sigma, "{f}");
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn schedule_is_monotone_and_clamped() {
        let s = ExplorationSchedule::default();
        assert_eq!(s.epsilon(0), 0.5);
        assert!((s.epsilon(25_000) - 0.255).abs() < 1e-12);
        assert_eq!(s.epsilon(50_000), 0.01);
        assert_eq!(s.epsilon(1_000_000), 0.01);
        let mut prev = 1.0;
        for t in (0..60_000).step_by(1000) {
            let e = s.epsilon(t);
            assert!(e <= prev);
            prev = e;
        }
    }
}
