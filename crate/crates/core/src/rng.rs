//! Counter-keyed random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is built from a tuple of
//! integers. Two agents that know the same tuple draw the same numbers, no matter
//! in which order they evaluate the rest of the tree.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream domains keep independent consumers of one run seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    TreeNode = 1,
    Environment = 2,
    Episode = 3,
    Initialisation = 4,
    Subsample = 5,
    Evaluation = 6,
    Verification = 7,
}

/// Builds a generator keyed by `(domain, a, b, c)`.
pub fn keyed_stream(domain: Domain, a: u64, b: u64, c: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&(domain as u64).to_le_bytes());
    key[8..16].copy_from_slice(&a.to_le_bytes());
    key[16..24].copy_from_slice(&b.to_le_bytes());
    key[24..].copy_from_slice(&c.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Commonly known randomness of one episode.
///
/// Identical across all agents of an episode. The stream for a tree node at
/// timestep `t` depends only on `(episode, t, node)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SharedSeed {
    pub episode: u64,
}

impl SharedSeed {
    pub fn new(episode: u64) -> Self {
        SharedSeed { episode }
    }

    /// Seed of the `index`-th episode of a run.
    pub fn for_episode(run_seed: u64, index: u64) -> Self {
        let mut rng = keyed_stream(Domain::Episode, run_seed, index, 0);
        SharedSeed {
            episode: rng.next_u64(),
        }
    }

    pub fn node_stream(&self, t: u64, node: usize) -> ChaCha8Rng {
        keyed_stream(Domain::TreeNode, self.episode, t, node as u64)
    }

    /// First uniform in `[0, 1)` of a node's stream.
    pub fn node_uniform(&self, t: u64, node: usize) -> f64 {
        self.node_stream(t, node).random::<f64>()
    }
}
