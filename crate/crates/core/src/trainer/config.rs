use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::approx::{Adam, Architecture, ExplorationSchedule};
use crate::envs::GridWorldConfig;
use crate::error::{domain, Result};
use crate::tree::{GroupSampler, HeadLayout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvConfig {
    Matrix { ck_fraction: f64, flip_p: f64 },
    Grid(GridWorldConfig),
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Matrix { .. } => "matrix",
            EnvConfig::Grid(_) => "grid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Pairwise policy tree with a central critic.
    Mackrl,
    /// Independent actors with a central critic.
    CentralV,
    /// Independent actors, each with its own critic on its own observation.
    Iac,
    /// One centralised controller over the joint action, on all observations.
    Jal,
    /// One controller over the joint action, on common knowledge only.
    CkJal,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Mackrl => "mackrl",
            Algorithm::CentralV => "central_v",
            Algorithm::Iac => "iac",
            Algorithm::Jal => "jal",
            Algorithm::CkJal => "ck_jal",
        }
    }
}

/// How evaluation episodes pick actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPolicy {
    /// Argmax at every node.
    Greedy,
    /// The trained stochastic policy without exploration noise.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub exploration: ExplorationSchedule,
    pub parallel_envs: usize,
    /// Episodes per update.
    pub batch_episodes: usize,
    /// Full-batch critic regressions per update.
    pub critic_steps: usize,
    /// Critic updates between target-network copies.
    pub target_update_interval: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Hyper {
    pub fn adam(&self, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub actor: HeadLayout,
    /// Head of joint-action controllers (JAL, CK-JAL).
    pub joint: Architecture,
    pub critic: Architecture,
    pub sampler: GroupSampler,
    /// Initial logit of the delegation action of pair controllers.
    pub delegate_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub algorithm: Algorithm,
    /// Number of pairwise partitions the pair selector keeps; `None` keeps all.
    pub partition_subsample: Option<usize>,
    pub seed: u64,
    pub total_env_steps: u64,
    /// Environment steps between greedy evaluations.
    pub eval_interval: u64,
    /// Episodes per evaluation where it cannot be computed exactly.
    pub eval_episodes: usize,
    pub eval_policy: EvalPolicy,
    pub hyper: Hyper,
    pub model: ModelConfig,
}

impl RunConfig {
    /// Desk-scale matrix game defaults.
    pub fn matrix(algorithm: Algorithm, ck_fraction: f64, flip_p: f64, seed: u64) -> Self {
        RunConfig {
            env: EnvConfig::Matrix {
                ck_fraction,
                flip_p,
            },
            algorithm,
            partition_subsample: None,
            seed,
            total_env_steps: 50_000,
            eval_interval: 5_000,
            eval_episodes: 0,
            eval_policy: EvalPolicy::Greedy,
            hyper: Hyper {
                actor_lr: 0.005,
                critic_lr: 0.005,
                lambda: 0.8,
                gamma: 1.0,
                exploration: ExplorationSchedule::default(),
                parallel_envs: 8,
                batch_episodes: 64,
                critic_steps: 1,
                target_update_interval: 200,
                adam_beta1: 0.9,
                adam_beta2: 0.999,
                adam_eps: 1e-8,
            },
            model: ModelConfig {
                actor: HeadLayout::uniform(Architecture::Tabular, false),
                joint: Architecture::Tabular,
                critic: Architecture::Tabular,
                sampler: GroupSampler::InverseCdf,
                delegate_bias: 7.0,
            },
        }
    }

    /// Desk-scale gridworld defaults.
    pub fn grid(algorithm: Algorithm, seed: u64) -> Self {
        let mlp = Architecture::Mlp { hidden: 16 };
        RunConfig {
            env: EnvConfig::Grid(GridWorldConfig::default()),
            algorithm,
            partition_subsample: None,
            seed,
            total_env_steps: 200_000,
            eval_interval: 20_000,
            eval_episodes: 100,
            eval_policy: EvalPolicy::Sample,
            hyper: Hyper {
                actor_lr: 0.001,
                critic_lr: 0.001,
                lambda: 0.8,
                gamma: 0.99,
                exploration: ExplorationSchedule::default(),
                parallel_envs: 8,
                batch_episodes: 8,
                critic_steps: 1,
                target_update_interval: 200,
                adam_beta1: 0.9,
                adam_beta2: 0.999,
                adam_eps: 1e-8,
            },
            model: ModelConfig {
                actor: HeadLayout::uniform(mlp, true),
                joint: mlp,
                critic: mlp,
                sampler: GroupSampler::InverseCdf,
                delegate_bias: 0.0,
            },
        }
    }

    pub fn run_id(&self) -> String {
        format!(
            "{}-{}-s{}",
            self.algorithm.name(),
            self.env.name(),
            self.seed
        )
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hyper;
        if !(0.0..=1.0).contains(&h.lambda) {
            return Err(domain(format!("lambda = {} outside [0, 1]", h.lambda)));
        }
        if !(0.0..=1.0).contains(&h.gamma) {
            return Err(domain(format!("gamma = {} outside [0, 1]", h.gamma)));
        }
        if h.parallel_envs == 0 || h.batch_episodes == 0 {
            return Err(domain("parallel_envs and batch_episodes must be positive"));
        }
        if !(h.actor_lr > 0.0) || !(h.critic_lr > 0.0) {
            return Err(domain("learning rates must be positive"));
        }
        if h.target_update_interval == 0 {
            return Err(domain("target_update_interval must be positive"));
        }
        let e = &h.exploration;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return Err(domain("exploration rates must lie in [0, 1]"));
        }
        if let EnvConfig::Matrix {
            ck_fraction,
            flip_p,
        } = self.env
        {
            if !(0.0..=1.0).contains(&ck_fraction) || !(0.0..=1.0).contains(&flip_p) {
                return Err(domain("matrix ck_fraction and flip_p must lie in [0, 1]"));
            }
        }
        if self.partition_subsample == Some(0) {
            return Err(domain("partition_subsample must be positive"));
        }
        Ok(())
    }
}
