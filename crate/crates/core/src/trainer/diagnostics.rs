use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Eval => "eval",
        }
    }
}

/// One row of the metric log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub run_id: String,
    pub seed: u64,
    pub env_steps: u64,
    pub phase: Phase,
    pub metric: String,
    pub value: f64,
}

/// Pair-controller decisions counted by how many entities the pair believes it
/// commonly knows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DelegationStats {
    /// `richness -> (delegations, decisions)`.
    pub buckets: BTreeMap<usize, (u64, u64)>,
}

impl DelegationStats {
    pub fn record(&mut self, richness: usize, delegated: bool) {
        let e = self.buckets.entry(richness).or_insert((0, 0));
        e.0 += delegated as u64;
        e.1 += 1;
    }

    pub fn merge(&mut self, other: &DelegationStats) {
        for (&k, &(d, n)) in &other.buckets {
            let e = self.buckets.entry(k).or_insert((0, 0));
            e.0 += d;
            e.1 += n;
        }
    }

    pub fn rate(&self, richness: usize) -> Option<f64> {
        self.buckets
            .get(&richness)
            .filter(|(_, n)| *n > 0)
            .map(|&(d, n)| d as f64 / n as f64)
    }

    pub fn rates(&self) -> Vec<(usize, f64)> {
        self.buckets
            .iter()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(&k, &(d, n))| (k, d as f64 / n as f64))
            .collect()
    }

    pub fn overall(&self) -> Option<f64> {
        let (d, n) = self
            .buckets
            .values()
            .fold((0, 0), |(a, b), &(d, n)| (a + d, b + n));
        (n > 0).then(|| d as f64 / n as f64)
    }

    pub fn metric_name(richness: usize) -> String {
        format!("delegation_rate_ck{richness}")
    }
}
