//! Correlated sampling from similar categorical distributions.
//!
//! Agents that hold slightly different beliefs about a group policy still want to
//! draw the same group action. Both samplers here turn shared randomness into a
//! sample from the caller's own distribution in a way that makes disagreement rare.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// Probabilities over a canonically ordered finite action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDistribution {
    probs: Vec<f64>,
}

impl CategoricalDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(domain("empty distribution"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(domain("probabilities must be finite and nonnegative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(domain(format!("probabilities sum to {sum}")));
        }
        Ok(CategoricalDistribution { probs })
    }

    pub fn uniform(n: usize) -> Self {
        CategoricalDistribution {
            probs: alloc::vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Inverse-CDF sample: the index `k` with `cdf(k-1) <= shared_uniform < cdf(k)`.
pub fn heuristic_sample(dist: &CategoricalDistribution, shared_uniform: f64) -> usize {
    inverse_cdf(dist.probs(), shared_uniform)
}

pub(crate) fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Only reachable when rounding leaves the total just below `u`.
    last_positive
}

/// Grid resolution for Holenstein's strategy: `gamma = 1 / resolution`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolensteinConfig {
    pub resolution: u32,
}

impl Default for HolensteinConfig {
    fn default() -> Self {
        HolensteinConfig { resolution: 1024 }
    }
}

impl HolensteinConfig {
    pub fn gamma(&self) -> f64 {
        1.0 / self.resolution as f64
    }
}

/// Holenstein's strategy.
///
/// The grid `U x {0, gamma, .., 1}` is shuffled by a permutation drawn from the
/// shared `stream`; the caller returns the action of the first grid point `(u, p)`
/// with `p < pi(u)`. Callers that share the stream share the permutation. The
/// permutation is generated lazily, one Fisher-Yates swap per inspected point.
pub fn holenstein_sample(
    dist: &CategoricalDistribution,
    config: &HolensteinConfig,
    mut stream: impl RngCore,
) -> Result<usize> {
    let k = config.resolution as usize;
    if k == 0 {
        return Err(Error::DegenerateResolution(
            "resolution must be positive".into(),
        ));
    }
    let per_action = k + 1;
    let total = dist.len() * per_action;
    let mut swaps: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..total {
        let r = stream.random_range(i..total);
        let at_r = *swaps.get(&r).unwrap_or(&r);
        let at_i = *swaps.get(&i).unwrap_or(&i);
        swaps.insert(r, at_i);
        let (u, j) = (at_r / per_action, at_r % per_action);
        if (j as f64) < dist.probs[u] * k as f64 {
            return Ok(u);
        }
    }
    Err(Error::DegenerateResolution(
        "acceptance set is empty".into(),
    ))
}

/// `(1/2) sum |p_i - q_i|`.
pub fn total_variation(a: &CategoricalDistribution, b: &CategoricalDistribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(domain(format!(
            "support sizes differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(0.5
        * a.probs
            .iter()
            .zip(&b.probs)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>())
}
