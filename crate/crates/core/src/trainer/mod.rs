//! Actor-critic training with a centralised critic, and the baselines.
//!
//! Each update collects a batch of on-policy episodes with decentralised
//! selection (or central selection for joint-action learners), regresses the
//! critic onto lambda-returns, and takes one policy-gradient step along
//! `A_t grad log pi(u_t)` with the scalar advantage
//! `A_t = r_t + gamma V(s_{t+1}, u_t) - V(s_t, u_{t-1})`.

mod config;
mod critic;
mod diagnostics;

pub use config::{Algorithm, EnvConfig, EvalPolicy, Hyper, ModelConfig, RunConfig};
pub use critic::{td_lambda_targets, Critic};
pub use diagnostics::{DelegationStats, MetricRecord, Phase};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::approx::AdamState;
use crate::envs::{
    EnvRng, Environment, Episode, EpisodeBatch, GridWorld, MatrixGame, MatrixGameConfig, Step,
};
use crate::error::{Error, Result};
use crate::partition::{enumerate_pair_partitions, subsample_partitions, AgentSet};
use crate::rng::{keyed_stream, Domain, SharedSeed};
use crate::tree::{init_stream, InputSource, PolicyTree, SelectionMode, Trace};

/// Actor, its optimiser state and the critics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub algorithm: Algorithm,
    pub tree: PolicyTree,
    pub actor_opt: Vec<AdamState>,
    /// One central critic, or one per agent for IAC.
    pub critics: Vec<Critic>,
}

impl Learner {
    pub fn new<E: Environment>(
        env: &E,
        config: &RunConfig,
        rng: &mut impl RngCore,
    ) -> Result<Self> {
        let n = env.n_agents();
        let m = &config.model;
        let tree = match config.algorithm {
            Algorithm::Mackrl => {
                let all = enumerate_pair_partitions(n)?;
                let parts = match config.partition_subsample {
                    Some(k) => subsample_partitions(&all, k, config.seed)?,
                    None => all,
                };
                let mut tree = PolicyTree::pairwise(env, parts, m.actor, rng)?;
                tree.set_delegate_bias(m.delegate_bias);
                tree
            }
            Algorithm::CentralV | Algorithm::Iac => PolicyTree::independent(env, m.actor, rng)?,
            Algorithm::Jal => PolicyTree::joint(env, InputSource::Joint, m.joint, rng)?,
            Algorithm::CkJal => PolicyTree::joint(env, InputSource::CommonKnowledge, m.joint, rng)?,
        };
        let critics = if config.algorithm == Algorithm::Iac {
            (0..n)
                .map(|_| Critic::new(m.critic, env.own_dim() + 1, rng))
                .collect()
        } else {
            vec![Critic::new(
                m.critic,
                env.state_dim() + n * env.n_actions(),
                rng,
            )]
        };
        let actor_opt = tree
            .heads
            .iter()
            .map(|h| AdamState::new(h.param_len()))
            .collect();
        Ok(Learner {
            algorithm: config.algorithm,
            tree,
            actor_opt,
            critics,
        })
    }

    /// The learner `train` starts from for `config`.
    pub fn for_config(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let mut init = init_stream(config.seed);
        match config.env {
            EnvConfig::Matrix {
                ck_fraction,
                flip_p,
            } => {
                let env = MatrixGame::new(MatrixGameConfig::from_ck_fraction(ck_fraction, flip_p)?);
                Learner::new(&env, config, &mut init)
            }
            EnvConfig::Grid(g) => Learner::new(&GridWorld::new(g)?, config, &mut init),
        }
    }

    /// Critic inputs of every step of `ep`, one sequence per critic.
    pub fn critic_inputs<E: Environment>(
        &self,
        env: &E,
        ep: &Episode<E::View>,
    ) -> Vec<Vec<Vec<f64>>> {
        let n = env.n_agents();
        let k = env.n_actions();
        let horizon = env.horizon().max(1) as f64;
        if self.algorithm == Algorithm::Iac {
            (0..n)
                .map(|a| {
                    ep.steps
                        .iter()
                        .enumerate()
                        .map(|(t, s)| {
                            let mut x = Vec::with_capacity(env.own_dim() + 1);
                            env.own_features(&s.views[a], a, &mut x);
                            x.push(t as f64 / horizon);
                            x
                        })
                        .collect()
                })
                .collect()
        } else {
            let seq = ep
                .steps
                .iter()
                .enumerate()
                .map(|(t, s)| {
                    let mut x = s.state.clone();
                    let base = x.len();
                    x.resize(base + n * k, 0.0);
                    if t > 0 {
                        for (a, &u) in ep.steps[t - 1].actions.iter().enumerate() {
                            x[base + a * k + u] = 1.0;
                        }
                    }
                    x
                })
                .collect();
            vec![seq]
        }
    }

    pub fn params_finite(&self) -> bool {
        self.tree
            .heads
            .iter()
            .all(|h| h.params.iter().all(|p| p.is_finite()))
            && self
                .critics
                .iter()
                .all(|c| c.head.params.iter().all(|p| p.is_finite()))
    }
}

/// Joint action of one timestep: per-agent decentralised selection when the tree
/// allows it, central traversal otherwise. Pair-controller decisions are added to
/// `stats`, counted once per visit.
pub fn select_joint<E: Environment>(
    env: &E,
    tree: &PolicyTree,
    views: &[E::View],
    seed: &SharedSeed,
    t: u64,
    mode: SelectionMode,
    stats: Option<&mut DelegationStats>,
) -> Result<Vec<usize>> {
    let n = env.n_agents();
    let mut traces: Vec<(usize, Trace)> = Vec::new();
    let joint = if tree.is_decentralised() {
        let mut joint = Vec::with_capacity(n);
        for (a, view) in views.iter().enumerate() {
            let (u, trace) = tree.select_action_traced(env, a, view, seed, t, mode)?;
            joint.push(u);
            traces.push((a, trace));
        }
        joint
    } else {
        let (joint, trace) = tree.sample_joint(env, views, seed, t, mode)?;
        traces.push((usize::MAX, trace));
        joint
    };
    if let Some(stats) = stats {
        for (agent, trace) in &traces {
            for &(id, k) in trace {
                let node = &tree.nodes()[id];
                let owner = node.group.first().expect("nonempty");
                if !node.is_pair_controller() || (*agent != usize::MAX && *agent != owner) {
                    continue;
                }
                if let Some(richness) = env.ck_richness(&views[owner], owner, node.group) {
                    stats.record(richness, Some(k) == node.delegate_index());
                }
            }
        }
    }
    Ok(joint)
}

fn with_context(e: Error, episode: u64, t: usize) -> Error {
    match e {
        Error::Domain(m) => Error::Domain(format!("episode {episode}, step {t}: {m}")),
        other => other,
    }
}

/// Runs one episode from a fresh reset.
pub fn run_episode<E: Environment>(
    env: &mut E,
    tree: &PolicyTree,
    mode: SelectionMode,
    seed: SharedSeed,
    rng: &mut EnvRng,
    stats: Option<&mut DelegationStats>,
) -> Result<Episode<E::View>> {
    env.reset(rng);
    play(env, tree, mode, seed, rng, stats)
}

fn play<E: Environment>(
    env: &mut E,
    tree: &PolicyTree,
    mode: SelectionMode,
    seed: SharedSeed,
    rng: &mut EnvRng,
    mut stats: Option<&mut DelegationStats>,
) -> Result<Episode<E::View>> {
    let mut steps = Vec::new();
    for t in 0..env.horizon().max(1) {
        let views = env.views();
        let mut state = Vec::with_capacity(env.state_dim());
        env.state_features(&mut state);
        let actions = select_joint(
            env,
            tree,
            &views,
            &seed,
            t as u64,
            mode,
            stats.as_deref_mut(),
        )
        .map_err(|e| with_context(e, seed.episode, t))?;
        let tr = env
            .step(&actions, rng)
            .map_err(|e| with_context(e, seed.episode, t))?;
        if !tr.reward.is_finite() {
            return Err(Error::NonFinite(format!(
                "reward at episode {}, step {t}",
                seed.episode
            )));
        }
        steps.push(Step {
            state,
            views,
            actions,
            reward: tr.reward,
        });
        if tr.done {
            break;
        }
    }
    Ok(Episode { seed, steps })
}

/// Collects `count` episodes starting at global episode index `first`, cycling
/// over `parallel` environment instances. Each episode draws its dynamics from
/// its own environment stream and its decisions from its own shared seed.
#[allow(clippy::too_many_arguments)]
pub fn collect<E: Environment>(
    proto: &E,
    tree: &PolicyTree,
    mode: SelectionMode,
    run_seed: u64,
    first: u64,
    count: usize,
    parallel: usize,
    stats: &mut DelegationStats,
) -> Result<EpisodeBatch<E::View>> {
    let mut envs = vec![proto.clone(); parallel.max(1)];
    let mut episodes = Vec::with_capacity(count);
    for i in 0..count {
        let index = first + i as u64;
        let env = &mut envs[i % parallel.max(1)];
        let mut rng = keyed_stream(Domain::Environment, run_seed, index, 0);
        let seed = SharedSeed::for_episode(run_seed, index);
        episodes.push(run_episode(env, tree, mode, seed, &mut rng, Some(stats))?);
    }
    Ok(EpisodeBatch { episodes })
}

/// Losses of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub mean_advantage: f64,
}

/// Critic regressions followed by one policy-gradient step on `batch`, which
/// must have been collected under the current policy with exploration `epsilon`.
pub fn update<E: Environment>(
    env: &E,
    learner: &mut Learner,
    batch: &EpisodeBatch<E::View>,
    epsilon: f64,
    h: &Hyper,
) -> Result<UpdateStats> {
    let inputs: Vec<Vec<Vec<Vec<f64>>>> = batch
        .episodes
        .iter()
        .map(|ep| learner.critic_inputs(env, ep))
        .collect();
    let critic_adam = h.adam(h.critic_lr);
    let mut critic_loss = 0.0;
    for (c, critic) in learner.critics.iter_mut().enumerate() {
        for _ in 0..h.critic_steps.max(1) {
            let mut xs: Vec<Vec<f64>> = Vec::new();
            let mut ys: Vec<f64> = Vec::new();
            for (ep, inp) in batch.episodes.iter().zip(&inputs) {
                let seq = &inp[c];
                let rewards: Vec<f64> = ep.steps.iter().map(|s| s.reward).collect();
                let mut next = vec![0.0; seq.len()];
                for t in 0..seq.len().saturating_sub(1) {
                    next[t] = critic.target_value(&seq[t + 1])?;
                }
                ys.extend(td_lambda_targets(&rewards, &next, h.gamma, h.lambda)?);
                xs.extend(seq.iter().cloned());
            }
            critic_loss = critic.update(&critic_adam, &xs, &ys, h.target_update_interval)?;
        }
    }

    let total_steps = batch.steps().max(1) as f64;
    let mut grads = learner.tree.zero_grads();
    let mut adv_sum = 0.0;
    for (ep, inp) in batch.episodes.iter().zip(&inputs) {
        // Advantages under the freshly updated critic, one scalar per critic.
        let adv: Vec<Vec<f64>> = learner
            .critics
            .iter()
            .zip(inp)
            .map(|(critic, seq)| {
                let values: Vec<f64> =
                    seq.iter().map(|x| critic.value(x)).collect::<Result<_>>()?;
                Ok((0..seq.len())
                    .map(|t| {
                        let next = values.get(t + 1).copied().unwrap_or(0.0);
                        ep.steps[t].reward + h.gamma * next - values[t]
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (t, step) in ep.steps.iter().enumerate() {
            let ev = learner.tree.evaluate(env, &step.views, epsilon)?;
            if learner.algorithm == Algorithm::Iac {
                for (a, &u) in step.actions.iter().enumerate() {
                    let id = learner
                        .tree
                        .node_for(AgentSet::singleton(a))
                        .expect("individual controller");
                    let scale = adv[a][t] / total_steps;
                    learner
                        .tree
                        .accumulate_node_log_grad(&ev, id, u, scale, &mut grads)?;
                    adv_sum += adv[a][t];
                }
            } else {
                let scale = adv[0][t] / total_steps;
                learner
                    .tree
                    .accumulate_log_grad_from(&ev, &step.actions, scale, &mut grads)?;
                adv_sum += adv[0][t];
            }
        }
    }
    let actor_adam = h.adam(h.actor_lr);
    for ((head, g), opt) in learner
        .tree
        .heads
        .iter_mut()
        .zip(&mut grads)
        .zip(&mut learner.actor_opt)
    {
        for x in g.iter_mut() {
            *x = -*x;
        }
        actor_adam.step(&mut head.params, g, opt)?;
    }
    if !critic_loss.is_finite() || !learner.params_finite() {
        return Err(Error::NonFinite(format!(
            "critic loss {critic_loss}, parameters finite: {}",
            learner.params_finite()
        )));
    }
    Ok(UpdateStats {
        critic_loss,
        mean_advantage: adv_sum / (total_steps * learner.critics.len() as f64),
    })
}

/// Expected undiscounted return: exact over every reset when the environment can
/// enumerate them and `mode` is greedy, otherwise the mean over `episodes` fixed
/// episodes.
pub fn evaluate<E: Environment>(
    proto: &E,
    tree: &PolicyTree,
    mode: SelectionMode,
    run_seed: u64,
    episodes: usize,
    stats: &mut DelegationStats,
) -> Result<f64> {
    let greedy = mode == SelectionMode::Greedy;
    if let Some(resets) = proto.enumerate_resets().filter(|_| greedy) {
        let mut rng = keyed_stream(Domain::Evaluation, run_seed, 0, 0);
        let mut total = 0.0;
        for (i, (p, mut env)) in resets.into_iter().enumerate() {
            let seed = SharedSeed::new(i as u64);
            let ep = play(
                &mut env,
                tree,
                SelectionMode::Greedy,
                seed,
                &mut rng,
                Some(stats),
            )?;
            total += p * ep.steps.iter().map(|s| s.reward).sum::<f64>();
        }
        return Ok(total);
    }
    let n = episodes.max(1);
    let mut env = proto.clone();
    let mut total = 0.0;
    for i in 0..n {
        let mut rng = keyed_stream(Domain::Evaluation, run_seed, i as u64, 0);
        let seed =
            SharedSeed::new(keyed_stream(Domain::Evaluation, run_seed, i as u64, 1).next_u64());
        let ep = run_episode(&mut env, tree, mode, seed, &mut rng, Some(stats))?;
        total += ep.steps.iter().map(|s| s.reward).sum::<f64>();
    }
    Ok(total / n as f64)
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub run_id: String,
    pub config: RunConfig,
    pub records: Vec<MetricRecord>,
    pub env_steps: u64,
    pub final_return: f64,
    /// Pair-controller decisions of the final greedy evaluation.
    pub eval_delegation: DelegationStats,
    /// Pair-controller decisions over the last fifth of training.
    pub late_train_delegation: DelegationStats,
    pub learner: Learner,
}

/// Trains one run; every random draw derives from `config.seed`.
pub fn train(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    match config.env {
        EnvConfig::Matrix {
            ck_fraction,
            flip_p,
        } => train_env(
            MatrixGame::new(MatrixGameConfig::from_ck_fraction(ck_fraction, flip_p)?),
            config,
        ),
        EnvConfig::Grid(g) => train_env(GridWorld::new(g)?, config),
    }
}

pub fn train_env<E: Environment>(proto: E, config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let h = &config.hyper;
    let run_id = config.run_id();
    let mut init = init_stream(config.seed);
    let mut learner = Learner::new(&proto, config, &mut init)?;
    let mut records = Vec::new();
    let push =
        |records: &mut Vec<MetricRecord>, steps: u64, phase: Phase, metric: &str, value: f64| {
            records.push(MetricRecord {
                run_id: run_id.clone(),
                seed: config.seed,
                env_steps: steps,
                phase,
                metric: metric.to_string(),
                value,
            });
        };

    let eval_mode = match config.eval_policy {
        EvalPolicy::Greedy => SelectionMode::Greedy,
        EvalPolicy::Sample => SelectionMode::Sample {
            epsilon: 0.0,
            sampler: config.model.sampler,
        },
    };
    let mut env_steps = 0u64;
    let mut episodes = 0u64;
    let mut next_eval = 0u64;
    let mut last_eval: Option<(u64, f64, DelegationStats)> = None;
    let mut late = DelegationStats::default();
    let late_from = config.total_env_steps - config.total_env_steps / 5;
    loop {
        if env_steps >= next_eval || env_steps >= config.total_env_steps {
            let mut stats = DelegationStats::default();
            let ret = evaluate(
                &proto,
                &learner.tree,
                eval_mode,
                config.seed,
                config.eval_episodes,
                &mut stats,
            )?;
            push(&mut records, env_steps, Phase::Eval, "return", ret);
            for (k, r) in stats.rates() {
                push(
                    &mut records,
                    env_steps,
                    Phase::Eval,
                    &DelegationStats::metric_name(k),
                    r,
                );
            }
            last_eval = Some((env_steps, ret, stats));
            next_eval = if config.eval_interval == 0 {
                u64::MAX
            } else {
                env_steps + config.eval_interval
            };
        }
        if env_steps >= config.total_env_steps {
            break;
        }
        let epsilon = h.exploration.epsilon(env_steps);
        let mut stats = DelegationStats::default();
        let mode = SelectionMode::Sample {
            epsilon,
            sampler: config.model.sampler,
        };
        let batch = collect(
            &proto,
            &learner.tree,
            mode,
            config.seed,
            episodes,
            h.batch_episodes,
            h.parallel_envs,
            &mut stats,
        )?;
        episodes += h.batch_episodes as u64;
        let up = update(&proto, &mut learner, &batch, epsilon, h)?;
        if env_steps >= late_from {
            late.merge(&stats);
        }
        env_steps += batch.steps() as u64;
        let mean_return = batch
            .episodes
            .iter()
            .map(|e| e.steps.iter().map(|s| s.reward).sum::<f64>())
            .sum::<f64>()
            / batch.episodes.len() as f64;
        push(&mut records, env_steps, Phase::Train, "return", mean_return);
        push(
            &mut records,
            env_steps,
            Phase::Train,
            "critic_loss",
            up.critic_loss,
        );
        push(&mut records, env_steps, Phase::Train, "epsilon", epsilon);
        if let Some(r) = stats.overall() {
            push(&mut records, env_steps, Phase::Train, "delegation_rate", r);
        }
        for (k, r) in stats.rates() {
            push(
                &mut records,
                env_steps,
                Phase::Train,
                &DelegationStats::metric_name(k),
                r,
            );
        }
    }
    let (steps, final_return, eval_delegation) = last_eval.expect("evaluated at least once");
    debug_assert_eq!(steps, env_steps);
    Ok(RunArtifacts {
        run_id,
        config: config.clone(),
        records,
        env_steps,
        final_return,
        eval_delegation,
        late_train_delegation: late,
        learner,
    })
}
