//! Environments and episode records.

mod grid;
mod matrix;

pub use grid::{GridAction, GridWorld, GridWorldConfig};
pub use matrix::{
    Game, MatrixGame, MatrixGameConfig, MatrixObservation, MatrixState, GAME_ENTITY, PAYOFF_A,
    PAYOFF_B,
};

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::partition::AgentSet;
use crate::rng::SharedSeed;
use crate::tree::Perception;

pub type EnvRng = ChaCha8Rng;

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub done: bool,
}

/// An episodic multi-agent environment. Its [`Perception`] half encodes views for
/// the policy tree; the rest drives the dynamics.
pub trait Environment: Perception + Clone {
    fn reset(&mut self, rng: &mut EnvRng);
    fn views(&self) -> Vec<Self::View>;
    fn step(&mut self, joint: &[usize], rng: &mut EnvRng) -> Result<Transition>;

    /// Maximum episode length.
    fn horizon(&self) -> usize;

    /// Length of the critic's state encoding.
    fn state_dim(&self) -> usize;
    fn state_features(&self, out: &mut Vec<f64>);

    /// Number of non-member entities `owner` believes `group` commonly knows,
    /// or `None` when it believes the group has no common knowledge at all.
    fn ck_richness(&self, view: &Self::View, owner: usize, group: AgentSet) -> Option<usize>;

    /// Every possible post-reset configuration with its probability, for games
    /// small enough to evaluate exactly.
    fn enumerate_resets(&self) -> Option<Vec<(f64, Self)>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step<V> {
    /// Critic state encoding `s_t`.
    pub state: Vec<f64>,
    /// Each agent's own view `z^a_t`.
    pub views: Vec<V>,
    pub actions: Vec<usize>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode<V> {
    pub seed: SharedSeed,
    pub steps: Vec<Step<V>>,
}

impl<V> Episode<V> {
    /// `sum_l gamma^l r_l` from the first step.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.steps
            .iter()
            .rev()
            .fold(0.0, |acc, s| s.reward + gamma * acc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeBatch<V> {
    pub episodes: Vec<Episode<V>>,
}

impl<V> EpisodeBatch<V> {
    pub fn steps(&self) -> usize {
        self.episodes.iter().map(|e| e.steps.len()).sum()
    }

    pub fn mean_return(&self, gamma: f64) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes
            .iter()
            .map(|e| e.discounted_return(gamma))
            .sum::<f64>()
            / self.episodes.len() as f64
    }
}
