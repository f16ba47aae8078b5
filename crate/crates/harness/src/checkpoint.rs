//! Parameter checkpoints.
//!
//! Layout: the 8-byte magic `MACKRLCK`, a little-endian `u32` header length, a
//! JSON header, then every parameter as a little-endian `f64` in header order.

use mackrl_core::approx::{Architecture, Head};
use mackrl_core::trainer::{Algorithm, Learner};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"MACKRLCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub architecture: Architecture,
    pub inputs: usize,
    pub outputs: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub env_steps: u64,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub params: Vec<f64>,
}

/// Actor heads, then per critic its online and target heads.
fn heads(learner: &Learner) -> Vec<(String, &Head)> {
    let mut out: Vec<(String, &Head)> = learner
        .tree
        .heads
        .iter()
        .enumerate()
        .map(|(i, h)| (format!("actor.{i}"), h))
        .collect();
    for (j, c) in learner.critics.iter().enumerate() {
        out.push((format!("critic.{j}"), &c.head));
        out.push((format!("critic_target.{j}"), &c.target));
    }
    out
}

fn heads_mut(learner: &mut Learner) -> Vec<&mut Head> {
    let mut out: Vec<&mut Head> = learner.tree.heads.iter_mut().collect();
    for c in learner.critics.iter_mut() {
        out.push(&mut c.head);
        out.push(&mut c.target);
    }
    out
}

impl Checkpoint {
    pub fn capture(learner: &Learner, seed: u64, env_steps: u64) -> Self {
        let mut blocks = Vec::new();
        let mut params = Vec::new();
        for (name, h) in heads(learner) {
            blocks.push(Block {
                name,
                architecture: h.arch,
                inputs: h.inputs,
                outputs: h.outputs,
                len: h.params.len(),
            });
            params.extend_from_slice(&h.params);
        }
        Checkpoint {
            header: Header {
                version: VERSION,
                seed,
                algorithm: learner.algorithm,
                env_steps,
                blocks,
            },
            params,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("headers serialize");
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| HarnessError::Checkpoint(m.to_string());
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic"));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes
            .get(12..12 + hlen)
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
        if header.version != VERSION {
            return Err(HarnessError::Checkpoint(format!(
                "unsupported version {}",
                header.version
            )));
        }
        let data = &bytes[12 + hlen..];
        let expected: usize = header.blocks.iter().map(|b| b.len).sum();
        if data.len() != 8 * expected {
            return Err(HarnessError::Checkpoint(format!(
                "expected {expected} parameters, found {} bytes",
                data.len()
            )));
        }
        let params = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Checkpoint { header, params })
    }

    /// Copies the parameters into `learner`, whose heads must match the header.
    pub fn restore(&self, learner: &mut Learner) -> Result<()> {
        if learner.algorithm != self.header.algorithm {
            return Err(HarnessError::Checkpoint("algorithm differs".into()));
        }
        let mut targets = heads_mut(learner);
        if targets.len() != self.header.blocks.len() {
            return Err(HarnessError::Checkpoint(format!(
                "checkpoint has {} heads, learner {}",
                self.header.blocks.len(),
                targets.len()
            )));
        }
        for (h, b) in targets.iter().zip(&self.header.blocks) {
            if h.arch != b.architecture
                || h.inputs != b.inputs
                || h.outputs != b.outputs
                || h.params.len() != b.len
            {
                return Err(HarnessError::Checkpoint(format!(
                    "head {} shape differs",
                    b.name
                )));
            }
        }
        let mut at = 0;
        for (h, b) in targets.iter_mut().zip(&self.header.blocks) {
            h.params.copy_from_slice(&self.params[at..at + b.len]);
            at += b.len;
        }
        Ok(())
    }
}
