//! Exhaustive optimal values of the matrix game for each policy class.
//!
//! All classes are searched over deterministic policies, which suffice for a
//! single-step cooperative game. The outcome space is small, so every expectation
//! is an exact finite sum.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::envs::{Environment, Game, MatrixGame, MatrixGameConfig};
use crate::error::{domain, Result};

const K: usize = 5;
/// Deterministic maps `{A, B, none} -> action`.
const MAPS: usize = K * K * K;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleTable {
    pub iac: f64,
    pub ck_jal: f64,
    pub jal: f64,
    pub mackrl: f64,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    p: f64,
    game: Game,
    /// 0: no bit, 1: bit with A, 2: bit with B.
    ck_state: usize,
    sigma: [usize; 2],
}

fn slot(g: Option<Game>) -> usize {
    match g {
        Some(Game::A) => 0,
        Some(Game::B) => 1,
        None => 2,
    }
}

fn outcomes(config: &MatrixGameConfig) -> Result<Vec<Outcome>> {
    if config.flip_p != 0.0 {
        return Err(domain(
            "the oracle is defined for noiseless common knowledge only",
        ));
    }
    let env = MatrixGame::new(*config);
    Ok(env
        .enumerate_resets()
        .expect("matrix game is enumerable")
        .into_iter()
        .map(|(p, g)| {
            let s = *g.state();
            let ck_state = match (s.ck, s.game) {
                (false, _) => 0,
                (true, Game::A) => 1,
                (true, Game::B) => 2,
            };
            Outcome {
                p,
                game: s.game,
                ck_state,
                sigma: [slot(s.private[0]), slot(s.private[1])],
            }
        })
        .collect())
}

fn map_action(map: usize, sigma: usize) -> usize {
    (map / K.pow(sigma as u32)) % K
}

/// Best expected payoff of one fixed joint action over `outs`.
fn best_joint(outs: &[&Outcome]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..K {
        for j in 0..K {
            let v: f64 = outs.iter().map(|o| o.p * o.game.payoff(i, j)).sum();
            best = best.max(v);
        }
    }
    if outs.is_empty() {
        0.0
    } else {
        best
    }
}

/// Expected payoffs of every pair of independent maps, restricted to each CK
/// state: `values[m1 * MAPS + m2][ck_state]`.
fn independent_values(outs: &[Outcome]) -> Vec<[f64; 3]> {
    let mut values = alloc::vec![[0.0; 3]; MAPS * MAPS];
    for m1 in 0..MAPS {
        for m2 in 0..MAPS {
            let v = &mut values[m1 * MAPS + m2];
            for o in outs {
                v[o.ck_state] += o.p
                    * o.game
                        .payoff(map_action(m1, o.sigma[0]), map_action(m2, o.sigma[1]));
            }
        }
    }
    values
}

/// Joint observation: common bit (0 or 1) and both private signals.
type ObsKey = (usize, usize, usize);

pub fn matrix_oracle(config: &MatrixGameConfig) -> Result<OracleTable> {
    let outs = outcomes(config)?;

    let by_state: Vec<Vec<&Outcome>> = (0..3)
        .map(|s| outs.iter().filter(|o| o.ck_state == s).collect())
        .collect();
    let joint_by_state: Vec<f64> = by_state.iter().map(|v| best_joint(v)).collect();
    let ck_jal = joint_by_state.iter().sum();

    let mut joint_obs: Vec<(ObsKey, Vec<&Outcome>)> = Vec::new();
    for o in &outs {
        let key = (o.ck_state.min(1), o.sigma[0], o.sigma[1]);
        match joint_obs.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(o),
            None => joint_obs.push((key, alloc::vec![o])),
        }
    }
    let jal = joint_obs.iter().map(|(_, v)| best_joint(v)).sum();

    let ind = independent_values(&outs);
    let mut iac = f64::NEG_INFINITY;
    let mut mackrl = f64::NEG_INFINITY;
    for v in &ind {
        iac = iac.max(v.iter().sum());
        mackrl = mackrl.max((0..3).map(|s| v[s].max(joint_by_state[s])).sum());
    }
    Ok(OracleTable {
        iac,
        ck_jal,
        jal,
        mackrl,
    })
}

/// Best payoff of one joint action when the game is a fair coin and unknown.
pub fn uninformed_value() -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..K {
        for j in 0..K {
            best = best.max(0.5 * (Game::A.payoff(i, j) + Game::B.payoff(i, j)));
        }
    }
    best
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn linear_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    if sxx == 0.0 {
        return 0.0;
    }
    sxy * sxy / (sxx * syy)
}
