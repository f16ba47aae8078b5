//! The single-step two-player matrix game with a common knowledge bit.
//!
//! A fair coin picks game A or B. With probability `p_ck` a bit is set that lets
//! both players see the game as common knowledge. Otherwise each player sees the
//! game privately with probability `p_sigma` and nothing otherwise, independently
//! of the other. `p_sigma` is chosen so that each player observes the game 75% of
//! the time overall. Optionally each player's reading of the bit is flipped with
//! probability `flip_p`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvRng, Environment, Transition};
use crate::ck::{BeliefSet, EntityId, EntityKind, EntityState};
use crate::error::{domain, Result};
use crate::partition::AgentSet;
use crate::tree::Perception;

/// Payoffs of game A, in fifths.
pub const PAYOFF_A: [[u8; 5]; 5] = [
    [5, 0, 0, 2, 0],
    [0, 1, 2, 4, 2],
    [0, 0, 0, 2, 0],
    [0, 0, 0, 1, 0],
    [0, 0, 0, 0, 5],
];

/// Payoffs of game B, in fifths.
pub const PAYOFF_B: [[u8; 5]; 5] = [
    [0, 0, 1, 0, 5],
    [0, 0, 2, 0, 0],
    [1, 2, 4, 2, 1],
    [0, 0, 2, 0, 0],
    [5, 0, 1, 0, 0],
];

/// Each player's overall probability of observing the game.
pub const OBSERVATION_RATE: f64 = 0.75;

/// Entity id standing for the game identity in belief sets.
pub const GAME_ENTITY: EntityId = EntityId(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Game {
    A,
    B,
}

impl Game {
    pub fn payoff(self, row: usize, col: usize) -> f64 {
        let m = match self {
            Game::A => &PAYOFF_A,
            Game::B => &PAYOFF_B,
        };
        m[row][col] as f64 / 5.0
    }

    fn index(self) -> usize {
        match self {
            Game::A => 0,
            Game::B => 1,
        }
    }
}

fn game_slot(g: Option<Game>) -> usize {
    match g {
        Some(Game::A) => 0,
        Some(Game::B) => 1,
        None => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameConfig {
    pub p_ck: f64,
    pub flip_p: f64,
}

impl MatrixGameConfig {
    pub fn new(p_ck: f64, flip_p: f64) -> Result<Self> {
        if !(0.0..=OBSERVATION_RATE).contains(&p_ck) {
            return Err(domain(format!(
                "p_ck = {p_ck} outside [0, {OBSERVATION_RATE}]"
            )));
        }
        if !(0.0..=1.0).contains(&flip_p) {
            return Err(domain(format!("flip_p = {flip_p} outside [0, 1]")));
        }
        Ok(MatrixGameConfig { p_ck, flip_p })
    }

    /// `ck_fraction` is the share of observed games that come from the bit,
    /// `p_ck / 0.75`.
    pub fn from_ck_fraction(ck_fraction: f64, flip_p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ck_fraction) {
            return Err(domain(format!("ck fraction {ck_fraction} outside [0, 1]")));
        }
        Self::new(ck_fraction * OBSERVATION_RATE, flip_p)
    }

    /// Solves `p_ck + (1 - p_ck) p_sigma = 0.75`.
    pub fn p_sigma(&self) -> f64 {
        if self.p_ck >= 1.0 {
            0.0
        } else {
            ((OBSERVATION_RATE - self.p_ck) / (1.0 - self.p_ck)).max(0.0)
        }
    }

    pub fn ck_fraction(&self) -> f64 {
        self.p_ck / OBSERVATION_RATE
    }
}

/// What one player sees: its (possibly flipped) reading of the bit and its game
/// channel, which carries the game whenever the true bit is set and the private
/// observation otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixObservation {
    pub ck_bit: bool,
    pub private_game: Option<Game>,
}

impl MatrixObservation {
    /// The owner's belief about what the pair commonly knows: the game identity
    /// when its bit reads set, nothing otherwise.
    pub fn belief(&self, owner: usize) -> BeliefSet {
        let group: BTreeSet<EntityId> = [EntityId(0), EntityId(1)].into_iter().collect();
        let mut b = BeliefSet {
            owner: EntityId(owner as u32),
            group,
            entities: BTreeSet::new(),
            observation: Vec::new(),
        };
        if self.ck_bit {
            b.entities.insert(GAME_ENTITY);
            let feature = match self.private_game {
                Some(g) => g.index() as f64,
                None => -1.0,
            };
            b.observation.push(EntityState {
                id: GAME_ENTITY,
                kind: EntityKind::Other,
                features: vec![feature],
            });
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixState {
    pub game: Game,
    pub ck: bool,
    pub private: [Option<Game>; 2],
    pub flipped: [bool; 2],
}

impl MatrixState {
    pub fn observation(&self, agent: usize) -> MatrixObservation {
        MatrixObservation {
            ck_bit: self.ck != self.flipped[agent],
            private_game: self.private[agent],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixGame {
    pub config: MatrixGameConfig,
    state: MatrixState,
}

impl MatrixGame {
    pub fn new(config: MatrixGameConfig) -> Self {
        MatrixGame {
            config,
            state: MatrixState {
                game: Game::A,
                ck: false,
                private: [None, None],
                flipped: [false, false],
            },
        }
    }

    pub fn with_state(config: MatrixGameConfig, state: MatrixState) -> Self {
        MatrixGame { config, state }
    }

    pub fn state(&self) -> &MatrixState {
        &self.state
    }

    /// Draws a fresh round.
    pub fn matrix_reset(&mut self, rng: &mut EnvRng) -> (MatrixState, [MatrixObservation; 2]) {
        let game = if rng.random::<f64>() < 0.5 {
            Game::A
        } else {
            Game::B
        };
        let ck = rng.random::<f64>() < self.config.p_ck;
        let p_sigma = self.config.p_sigma();
        let mut private = [None, None];
        for p in &mut private {
            let sees = ck || rng.random::<f64>() < p_sigma;
            *p = sees.then_some(game);
        }
        let mut flipped = [false, false];
        for f in &mut flipped {
            *f = rng.random::<f64>() < self.config.flip_p;
        }
        self.state = MatrixState {
            game,
            ck,
            private,
            flipped,
        };
        (
            self.state,
            [self.state.observation(0), self.state.observation(1)],
        )
    }

    /// Payoff of the joint action `(row, col)` in the current game, 0-indexed.
    pub fn matrix_step(&self, row: usize, col: usize) -> Result<f64> {
        if row >= 5 || col >= 5 {
            return Err(domain(format!("action ({row}, {col}) outside 0..5")));
        }
        Ok(self.state.game.payoff(row, col))
    }
}

fn each_flip(p: f64) -> Vec<(f64, bool)> {
    [(1.0 - p, false), (p, true)]
        .into_iter()
        .filter(|(q, _)| *q > 0.0)
        .collect()
}

impl Perception for MatrixGame {
    type View = MatrixObservation;

    fn n_agents(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        5
    }

    /// One-hot over believed common knowledge: none, A, B, bit set with no game.
    fn group_dim(&self, _group_size: usize) -> usize {
        4
    }

    fn group_features(
        &self,
        view: &MatrixObservation,
        _owner: usize,
        _group: AgentSet,
        out: &mut Vec<f64>,
    ) {
        let slot = match (view.ck_bit, view.private_game) {
            (false, _) => 0,
            (true, Some(Game::A)) => 1,
            (true, Some(Game::B)) => 2,
            (true, None) => 3,
        };
        let base = out.len();
        out.resize(base + 4, 0.0);
        out[base + slot] = 1.0;
    }

    /// One-hot over the game channel: A, B, nothing.
    fn own_dim(&self) -> usize {
        3
    }

    fn own_features(&self, view: &MatrixObservation, _agent: usize, out: &mut Vec<f64>) {
        let base = out.len();
        out.resize(base + 3, 0.0);
        out[base + game_slot(view.private_game)] = 1.0;
    }

    /// One-hot over both players' full observations `(c1, s1, c2, s2)`.
    fn joint_dim(&self) -> usize {
        36
    }

    fn joint_features(&self, views: &[MatrixObservation], out: &mut Vec<f64>) {
        let code = |v: &MatrixObservation| v.ck_bit as usize * 3 + game_slot(v.private_game);
        let base = out.len();
        out.resize(base + 36, 0.0);
        out[base + code(&views[0]) * 6 + code(&views[1])] = 1.0;
    }
}

impl Environment for MatrixGame {
    fn reset(&mut self, rng: &mut EnvRng) {
        self.matrix_reset(rng);
    }

    fn views(&self) -> Vec<MatrixObservation> {
        vec![self.state.observation(0), self.state.observation(1)]
    }

    fn step(&mut self, joint: &[usize], _rng: &mut EnvRng) -> Result<Transition> {
        if joint.len() != 2 {
            return Err(domain("matrix game needs two actions"));
        }
        Ok(Transition {
            reward: self.matrix_step(joint[0], joint[1])?,
            done: true,
        })
    }

    fn horizon(&self) -> usize {
        1
    }

    fn state_dim(&self) -> usize {
        144
    }

    fn state_features(&self, out: &mut Vec<f64>) {
        let s = &self.state;
        let code = ((((s.game.index() * 2 + s.ck as usize) * 3 + game_slot(s.private[0])) * 3
            + game_slot(s.private[1]))
            * 2
            + s.flipped[0] as usize)
            * 2
            + s.flipped[1] as usize;
        let base = out.len();
        out.resize(base + 144, 0.0);
        out[base + code] = 1.0;
    }

    fn ck_richness(
        &self,
        view: &MatrixObservation,
        _owner: usize,
        _group: AgentSet,
    ) -> Option<usize> {
        Some(view.ck_bit as usize)
    }

    fn enumerate_resets(&self) -> Option<Vec<(f64, Self)>> {
        let c = self.config;
        let ps = c.p_sigma();
        let mut out = Vec::new();
        for game in [Game::A, Game::B] {
            for (p_bit, ck) in [(1.0 - c.p_ck, false), (c.p_ck, true)] {
                if p_bit == 0.0 {
                    continue;
                }
                let channels: Vec<(f64, [Option<Game>; 2])> = if ck {
                    vec![(1.0, [Some(game), Some(game)])]
                } else {
                    let mut v = Vec::new();
                    for (p1, s1) in [(ps, Some(game)), (1.0 - ps, None)] {
                        for (p2, s2) in [(ps, Some(game)), (1.0 - ps, None)] {
                            if p1 * p2 > 0.0 {
                                v.push((p1 * p2, [s1, s2]));
                            }
                        }
                    }
                    v
                };
                for (p_c, private) in channels {
                    for (p_f0, f0) in each_flip(c.flip_p) {
                        for (p_f1, f1) in each_flip(c.flip_p) {
                            let state = MatrixState {
                                game,
                                ck,
                                private,
                                flipped: [f0, f1],
                            };
                            out.push((
                                0.5 * p_bit * p_c * p_f0 * p_f1,
                                MatrixGame::with_state(c, state),
                            ));
                        }
                    }
                }
            }
        }
        Some(out)
    }
}
