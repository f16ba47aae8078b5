//! Property suites run from the command line.
//!
//! Every check compares two independently computed quantities and reports one
//! line; sample sizes are smaller than the test suite's so `verify all` finishes
//! in seconds.

use std::collections::BTreeSet;
use std::fmt;

use mackrl_core::approx::{Architecture, Head};
use mackrl_core::ck::{
    belief_common_knowledge, common_knowledge_closed_form, common_knowledge_recursive, observe,
    visible_set, CircularFov, EntityId, EntityKind, EntityState, TabularMask, VisibilityMask,
    WorldState,
};
use mackrl_core::envs::{Environment, GridWorld, GridWorldConfig, MatrixGame, MatrixGameConfig};
use mackrl_core::oracle::matrix_oracle;
use mackrl_core::partition::{
    enumerate_pair_partitions, pair_partition_count, AgentSet, Partition,
};
use mackrl_core::rng::{keyed_stream, Domain, SharedSeed};
use mackrl_core::sampling::{
    heuristic_sample, holenstein_sample, total_variation, CategoricalDistribution, HolensteinConfig,
};
use mackrl_core::trainer::Critic;
use mackrl_core::tree::{
    Evaluation, GroupSampler, HeadLayout, Perception, PolicyTree, SelectionMode,
};
use rand::{Rng, RngCore};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Ck,
    Tree,
    Sampling,
    Gradients,
    Envs,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Ck => "ck",
            Suite::Tree => "tree",
            Suite::Sampling => "sampling",
            Suite::Gradients => "gradients",
            Suite::Envs => "envs",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}/{}: {}", self.suite, self.name, self.detail)
    }
}

fn check(suite: &'static str, name: &'static str, pass: bool, detail: String) -> Check {
    Check {
        suite,
        name,
        pass,
        detail,
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    Ok(match suite {
        Suite::Ck => ck_suite()?,
        Suite::Tree => tree_suite()?,
        Suite::Sampling => sampling_suite()?,
        Suite::Gradients => gradients_suite()?,
        Suite::Envs => envs_suite()?,
        Suite::All => {
            let mut all = Vec::new();
            for s in [
                Suite::Ck,
                Suite::Tree,
                Suite::Sampling,
                Suite::Gradients,
                Suite::Envs,
            ] {
                all.extend(run_suite(s)?);
            }
            all
        }
    })
}

enum Mask {
    Fov(CircularFov),
    Table(TabularMask),
}

impl VisibilityMask for Mask {
    fn visible(&self, observer: &[f64], target: &[f64]) -> bool {
        match self {
            Mask::Fov(m) => m.visible(observer, target),
            Mask::Table(m) => m.visible(observer, target),
        }
    }
}

fn random_world(rng: &mut impl RngCore) -> (WorldState, Mask, BTreeSet<EntityId>) {
    let agents = rng.random_range(1..=5u32);
    let total = agents + rng.random_range(0..=4u32);
    let entities = (0..total)
        .map(|i| {
            let kind = if i < agents {
                EntityKind::Agent
            } else {
                EntityKind::Other
            };
            EntityState::new(
                i,
                kind,
                vec![
                    rng.random_range(0.0..4.0),
                    rng.random_range(0.0..4.0),
                    i as f64,
                ],
            )
        })
        .collect();
    let state = WorldState::new(entities).expect("distinct ids");
    let mask = if rng.random_bool(0.5) {
        Mask::Fov(CircularFov::new(rng.random_range(0.5..4.0)))
    } else {
        let p = rng.random_range(0.3..1.0);
        Mask::Table(TabularMask::new(
            (0..total)
                .map(|_| (0..total).map(|_| rng.random_bool(p)).collect())
                .collect(),
            2,
        ))
    };
    let mut group: BTreeSet<EntityId> = (0..agents)
        .filter(|_| rng.random_bool(0.6))
        .map(EntityId)
        .collect();
    if group.is_empty() {
        group.insert(EntityId(rng.random_range(0..agents)));
    }
    (state, mask, group)
}

fn ck_suite() -> Result<Vec<Check>> {
    const CONFIGS: usize = 200;
    let mut rng = keyed_stream(Domain::Verification, 101, 0, 0);
    let (mut fixed_point, mut symmetric, mut contained, mut belief) = (0, 0, 0, 0);
    let mut nonempty = 0;
    for _ in 0..CONFIGS {
        let (state, mask, group) = random_world(&mut rng);
        let closed = common_knowledge_closed_form(&state, &group, &mask)?;
        nonempty += !closed.entities.is_empty() as usize;
        let mut from_each = Vec::new();
        for &a in &group {
            let deep = common_knowledge_recursive(&state, &group, &mask, a, group.len() + 8)?;
            let at = common_knowledge_recursive(&state, &group, &mask, a, group.len())?;
            fixed_point += (deep != closed.entities || at != deep) as usize;
            contained += !closed.entities.is_subset(&visible_set(&state, a, &mask)?) as usize;
            let own = observe(&state, a, &mask)?;
            belief += (belief_common_knowledge(&own, &group, &mask)?.entities != closed.entities)
                as usize;
            from_each.push(deep);
        }
        symmetric += from_each.windows(2).any(|w| w[0] != w[1]) as usize;
    }
    let s = "ck";
    Ok(vec![
        check(
            s,
            "recursion_reaches_closed_form",
            fixed_point == 0,
            format!("{CONFIGS} configurations ({nonempty} nonempty), {fixed_point} mismatches"),
        ),
        check(
            s,
            "members_agree",
            symmetric == 0,
            format!("{symmetric} groups whose members disagree"),
        ),
        check(
            s,
            "within_every_view",
            contained == 0,
            format!("{contained} members missing common entities"),
        ),
        check(
            s,
            "noiseless_belief_is_exact",
            belief == 0,
            format!("{belief} beliefs differ from common knowledge"),
        ),
    ])
}

/// Agents share one feature vector for group controllers and keep another private.
struct Toy {
    n: usize,
    k: usize,
    dim: usize,
}

#[derive(Clone)]
struct ToyView {
    shared: Vec<f64>,
    own: Vec<f64>,
}

impl Perception for Toy {
    type View = ToyView;

    fn n_agents(&self) -> usize {
        self.n
    }

    fn n_actions(&self) -> usize {
        self.k
    }

    fn group_dim(&self, _size: usize) -> usize {
        self.dim + 1
    }

    fn group_features(&self, view: &ToyView, _owner: usize, group: AgentSet, out: &mut Vec<f64>) {
        out.extend_from_slice(&view.shared);
        out.push(group.len() as f64 / self.n as f64);
    }

    fn own_dim(&self) -> usize {
        self.dim
    }

    fn own_features(&self, view: &ToyView, _agent: usize, out: &mut Vec<f64>) {
        out.extend_from_slice(&view.own);
    }
}

fn toy_views(toy: &Toy, rng: &mut impl RngCore) -> Vec<ToyView> {
    let shared: Vec<f64> = (0..toy.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..toy.n)
        .map(|_| ToyView {
            shared: shared.clone(),
            own: (0..toy.dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect()
}

fn toy_tree(toy: &Toy, arch: Architecture, rng: &mut impl RngCore) -> Result<PolicyTree> {
    let mut tree = PolicyTree::pairwise(
        toy,
        enumerate_pair_partitions(toy.n)?,
        HeadLayout::uniform(arch, true),
        rng,
    )?;
    let p: Vec<f64> = tree
        .flat_params()
        .iter()
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    tree.set_flat_params(&p)?;
    Ok(tree)
}

fn joint_actions(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..k.pow(n as u32))
        .map(|mut i| {
            let mut u = vec![0; n];
            for a in (0..n).rev() {
                u[a] = i % k;
                i /= k;
            }
            u
        })
        .collect()
}

/// Probability of `joint` under a three-agent tree, summed over the partitions
/// `{ab}{c}` from the per-node distributions.
fn three_agent_formula(tree: &PolicyTree, ev: &Evaluation, joint: &[usize]) -> Result<f64> {
    let k = tree.n_actions();
    let root = &tree.nodes()[tree.root()];
    let node = |g: AgentSet| {
        tree.node_for(g)
            .ok_or_else(|| HarnessError::Usage("tree lacks a group node".into()))
    };
    let mut total = 0.0;
    for (a, b, c) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let part = Partition::new(vec![
            AgentSet::from_members(&[a, b]),
            AgentSet::singleton(c),
        ])?;
        let sel = root
            .partitions
            .iter()
            .position(|p| *p == part)
            .expect("all partitions present");
        let pair = node(AgentSet::from_members(&[a, b]))?;
        let d = tree.nodes()[pair]
            .delegate_index()
            .expect("pair controllers delegate");
        let pp = &ev.probs[pair];
        let solo =
            |x: usize| -> Result<f64> { Ok(ev.probs[node(AgentSet::singleton(x))?][joint[x]]) };
        let pair_term = pp[joint[a] * k + joint[b]] + pp[d] * solo(a)? * solo(b)?;
        total += ev.probs[tree.root()][root.n_env + sel] * pair_term * solo(c)?;
    }
    Ok(total)
}

fn tree_suite() -> Result<Vec<Check>> {
    let s = "tree";
    let mut out = Vec::new();
    let counts_ok = (2..=11).all(|n| {
        let top = if n % 2 == 0 { n - 1 } else { n } as u128;
        let df: u128 = (1..=top).rev().step_by(2).product();
        enumerate_pair_partitions(n)
            .map(|p| p.len() as u128 == df)
            .unwrap_or(false)
            && pair_partition_count(n) == df
    });
    out.push(check(
        s,
        "partition_counts",
        counts_ok,
        "n = 2..11 against (n-1)!! and n!!".into(),
    ));

    let mut rng = keyed_stream(Domain::Verification, 102, 0, 0);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let toy = Toy {
            n: 3,
            k: 2 + i % 3,
            dim: 3,
        };
        let arch = if i % 2 == 0 {
            Architecture::Linear
        } else {
            Architecture::Mlp { hidden: 3 }
        };
        let tree = toy_tree(&toy, arch, &mut rng)?;
        let views = toy_views(&toy, &mut rng);
        let eps = if i % 4 == 0 {
            0.0
        } else {
            rng.random_range(0.0..0.5)
        };
        let joint: Vec<usize> = (0..3).map(|_| rng.random_range(0..toy.k)).collect();
        let ev = tree.evaluate(&toy, &views, eps)?;
        let p = tree.joint_policy_from(&ev, tree.nodes()[tree.root()].group, &joint)?;
        worst = worst.max((p - three_agent_formula(&tree, &ev, &joint)?).abs());
    }
    out.push(check(
        s,
        "three_agent_formula",
        worst <= 1e-12,
        format!("200 trees, max |diff| {worst:.2e}"),
    ));

    let mut worst_sum: f64 = 0.0;
    let (mut incoherent, mut impossible, mut draws) = (0u64, 0u64, 0u64);
    for i in 0..12 {
        let toy = Toy {
            n: 2 + i % 3,
            k: 3,
            dim: 2,
        };
        let tree = toy_tree(&toy, Architecture::Linear, &mut rng)?;
        let views = toy_views(&toy, &mut rng);
        let epsilon = [0.0, 0.1, 0.3][i % 3];
        let root = tree.nodes()[tree.root()].group;
        let joints = joint_actions(toy.n, toy.k);
        let probs: Vec<f64> = joints
            .iter()
            .map(|u| tree.joint_policy(&toy, &views, root, u, epsilon))
            .collect::<mackrl_core::Result<_>>()?;
        worst_sum = worst_sum.max((probs.iter().sum::<f64>() - 1.0).abs());
        let sampler = if i % 4 == 3 {
            GroupSampler::Holenstein(HolensteinConfig::default())
        } else {
            GroupSampler::InverseCdf
        };
        let mode = SelectionMode::Sample { epsilon, sampler };
        let base = rng.next_u64();
        for t in 0..500u64 {
            let seed = SharedSeed::new(base.wrapping_add(t));
            let joint: Vec<usize> = (0..toy.n)
                .map(|a| tree.select_action(&toy, a, &views[a], &seed, 0, mode))
                .collect::<mackrl_core::Result<_>>()?;
            let (central, _) = tree.sample_joint(&toy, &views, &seed, 0, mode)?;
            incoherent += (central != joint) as u64;
            impossible += (probs[joint.iter().fold(0, |acc, &u| acc * toy.k + u)] <= 0.0) as u64;
            draws += 1;
        }
    }
    out.push(check(
        s,
        "joint_policy_normalised",
        worst_sum <= 1e-9,
        format!("worst |sum - 1| {worst_sum:.1e}"),
    ));
    out.push(check(
        s,
        "decentralised_equals_central",
        incoherent == 0 && impossible == 0,
        format!("{draws} shared-seed draws, {incoherent} incoherent, {impossible} with zero probability"),
    ));
    Ok(out)
}

fn random_distribution(k: usize, rng: &mut impl RngCore) -> Vec<f64> {
    let w: Vec<f64> = (0..k)
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn sampling_suite() -> Result<Vec<Check>> {
    const PAIRS: usize = 20;
    const TRIALS: u64 = 20_000;
    let s = "sampling";
    let cfg = HolensteinConfig::default();
    let mut rng = keyed_stream(Domain::Verification, 103, 0, 0);
    let mut slack = f64::INFINITY;
    let mut same_disagree = 0u64;
    for i in 0..PAIRS {
        let k = 2 + i % 5;
        let p = random_distribution(k, &mut rng);
        let noise = random_distribution(k, &mut rng);
        let mix = rng.random_range(0.0..1.0);
        let q: Vec<f64> = p
            .iter()
            .zip(&noise)
            .map(|(a, b)| (1.0 - mix) * a + mix * b)
            .collect();
        let (p, q) = (
            CategoricalDistribution::new(p)?,
            CategoricalDistribution::new(q)?,
        );
        let delta = total_variation(&p, &q)?;
        let bound = 2.0 * delta / (1.0 + delta);
        let base = rng.next_u64();
        let mut disagree = 0u64;
        for t in 0..TRIALS {
            let a = holenstein_sample(&p, &cfg, keyed_stream(Domain::TreeNode, base, t, 0))?;
            let b = holenstein_sample(&q, &cfg, keyed_stream(Domain::TreeNode, base, t, 0))?;
            let a2 = holenstein_sample(&p, &cfg, keyed_stream(Domain::TreeNode, base, t, 0))?;
            disagree += (a != b) as u64;
            same_disagree += (a != a2) as u64;
        }
        let sigma = (bound * (1.0 - bound) / TRIALS as f64).sqrt();
        slack = slack.min(bound + 3.0 * sigma - disagree as f64 / TRIALS as f64);
    }

    // Inverse-CDF frequencies against the distribution, 4 sigma per cell.
    let p = CategoricalDistribution::new(vec![0.1, 0.2, 0.3, 0.4])?;
    let n = 40_000;
    let mut counts = [0u64; 4];
    for _ in 0..n {
        counts[heuristic_sample(&p, rng.random::<f64>())] += 1;
    }
    let worst_z = counts
        .iter()
        .zip(p.probs())
        .map(|(&c, &q)| (c as f64 - q * n as f64).abs() / (n as f64 * q * (1.0 - q)).sqrt())
        .fold(0.0, f64::max);
    Ok(vec![
        check(
            s,
            "holenstein_disagreement_bound",
            slack >= 0.0,
            format!(
                "{PAIRS} pairs x {TRIALS} trials, smallest slack to 2d/(1+d) + 3 sigma {slack:.4}"
            ),
        ),
        check(
            s,
            "shared_stream_agrees",
            same_disagree == 0,
            format!("{same_disagree} disagreements on equal inputs"),
        ),
        check(
            s,
            "inverse_cdf_frequencies",
            worst_z <= 4.0,
            format!("{n} draws, worst cell z {worst_z:.2}"),
        ),
    ])
}

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;
const FD_FLOOR: f64 = 1e-7;

fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, n)| a.abs().max(n.abs()) >= FD_FLOOR)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()))
        .fold(0.0, f64::max)
}

fn central_difference(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            p[i] = params[i] + FD_STEP;
            let up = f(&p);
            p[i] = params[i] - FD_STEP;
            let down = f(&p);
            p[i] = params[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn gradients_suite() -> Result<Vec<Check>> {
    let s = "gradients";
    let mut rng = keyed_stream(Domain::Verification, 104, 0, 0);

    let mut tree_err: f64 = 0.0;
    for case in 0..12 {
        let n = 2 + case % 3;
        let toy = Toy {
            n,
            k: 2 + case % 2,
            dim: 3,
        };
        let arch = if case % 3 == 0 {
            Architecture::Linear
        } else {
            Architecture::Mlp { hidden: 4 }
        };
        let tree = toy_tree(&toy, arch, &mut rng)?;
        let views = toy_views(&toy, &mut rng);
        let joint: Vec<usize> = (0..n).map(|_| rng.random_range(0..toy.k)).collect();
        let eps = [0.0, 0.1, 0.5][case % 3];
        let g = tree.log_joint_policy_grad(&toy, &views, &joint, eps)?;
        let root = tree.nodes()[tree.root()].group;
        let mut t = tree.clone();
        let numeric = central_difference(&tree.flat_params(), |p| {
            t.set_flat_params(p).expect("same length");
            t.joint_policy(&toy, &views, root, &joint, eps)
                .expect("valid tree")
                .ln()
        });
        tree_err = tree_err.max(max_rel_err(&g, &numeric));
    }

    let mut head_err: f64 = 0.0;
    for arch in [
        Architecture::Linear,
        Architecture::Tabular,
        Architecture::Mlp { hidden: 5 },
        Architecture::Recurrent { hidden: 4 },
    ] {
        for _ in 0..4 {
            let mut head = Head::init(arch, 4, 3, &mut rng);
            for p in &mut head.params {
                *p = rng.random_range(-1.0..1.0);
            }
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cot: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let hidden: Option<Vec<f64>> =
                matches!(arch, Architecture::Recurrent { .. }).then(|| {
                    (0..arch.hidden())
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect()
                });
            let g = head.grad(&x, hidden.as_deref(), &cot)?;
            let mut h = head.clone();
            let numeric = central_difference(&head.params, |p| {
                h.params.copy_from_slice(p);
                let (y, _) = h.forward(&x, hidden.as_deref()).expect("valid head");
                y.iter().zip(&cot).map(|(a, b)| a * b).sum()
            });
            head_err = head_err.max(max_rel_err(&g, &numeric));
        }
    }

    let mut critic_err: f64 = 0.0;
    for arch in [Architecture::Linear, Architecture::Mlp { hidden: 6 }] {
        let mut critic = Critic::new(arch, 5, &mut rng);
        for p in &mut critic.head.params {
            *p = rng.random_range(-1.0..1.0);
        }
        let xs: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, g) = critic.loss_grad(&xs, &ys)?;
        let mut c = critic.clone();
        let numeric = central_difference(&critic.head.params, |p| {
            c.head.params.copy_from_slice(p);
            c.loss_grad(&xs, &ys).expect("valid critic").0
        });
        critic_err = critic_err.max(max_rel_err(&g, &numeric));
    }

    let line = |e: f64| format!("worst relative error {e:.1e} <= {FD_TOL:.0e}");
    Ok(vec![
        check(s, "log_joint_policy", tree_err <= FD_TOL, line(tree_err)),
        check(s, "heads", head_err <= FD_TOL, line(head_err)),
        check(s, "critic", critic_err <= FD_TOL, line(critic_err)),
    ])
}

fn envs_suite() -> Result<Vec<Check>> {
    let s = "envs";
    let mut out = Vec::new();

    // Observation rates of the matrix game.
    let n = 40_000;
    let mut worst_z: f64 = 0.0;
    for f in [0.0, 0.5, 1.0] {
        let cfg = MatrixGameConfig::from_ck_fraction(f, 0.0)?;
        let mut env = MatrixGame::new(cfg);
        let mut rng = keyed_stream(Domain::Verification, 105, (f * 10.0) as u64, 0);
        let (mut ck, mut seen) = (0u64, 0u64);
        for _ in 0..n {
            let (state, _) = env.matrix_reset(&mut rng);
            ck += state.ck as u64;
            seen += state.private[0].is_some() as u64;
        }
        let z = |count: u64, p: f64| {
            let sd = (n as f64 * p * (1.0 - p)).sqrt().max(1e-12);
            (count as f64 - p * n as f64).abs() / sd
        };
        worst_z = worst_z.max(z(ck, cfg.p_ck)).max(z(seen, 0.75));
    }
    out.push(check(
        s,
        "matrix_observation_rates",
        worst_z <= 4.0,
        format!("{n} resets per fraction, worst z {worst_z:.2}"),
    ));

    let mut ordered = true;
    let mut shown = Vec::new();
    for f in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let o = matrix_oracle(&MatrixGameConfig::from_ck_fraction(f, 0.0)?)?;
        ordered &= o.jal + 1e-12 >= o.mackrl && o.mackrl + 1e-12 >= o.iac.max(o.ck_jal);
        shown.push(format!("{f}: {:.4}", o.mackrl));
    }
    out.push(check(
        s,
        "oracle_ordering",
        ordered,
        format!(
            "JAL >= MACKRL >= max(IAC, CK-JAL); MACKRL {}",
            shown.join(", ")
        ),
    ));

    // Gridworld observations are exactly the visible sets; decentralised play is coherent.
    let cfg = GridWorldConfig::default();
    let world = GridWorld::new(cfg)?;
    let mut rng = keyed_stream(Domain::Verification, 106, 0, 0);
    let mut tree = PolicyTree::pairwise(
        &world,
        enumerate_pair_partitions(cfg.n_agents)?,
        HeadLayout::uniform(Architecture::Mlp { hidden: 8 }, true),
        &mut rng,
    )?;
    let p: Vec<f64> = tree
        .flat_params()
        .iter()
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    tree.set_flat_params(&p)?;
    let mode = SelectionMode::Sample {
        epsilon: 0.1,
        sampler: GroupSampler::InverseCdf,
    };
    let mut env = world.clone();
    let mut env_rng = keyed_stream(Domain::Environment, 106, 0, 0);
    env.reset(&mut env_rng);
    let (mut wrong_view, mut mismatches, mut episode, mut t) = (0usize, 0usize, 0u64, 0u64);
    let steps = 2_000;
    for _ in 0..steps {
        let ws = env.world_state();
        let views = env.views();
        for (a, v) in views.iter().enumerate() {
            wrong_view += (v.ids() != visible_set(&ws, EntityId(a as u32), env.mask())?) as usize;
        }
        let seed = SharedSeed::for_episode(106, episode);
        let joint: Vec<usize> = (0..cfg.n_agents)
            .map(|a| tree.select_action(&env, a, &views[a], &seed, t, mode))
            .collect::<mackrl_core::Result<_>>()?;
        let (central, _) = tree.sample_joint(&env, &views, &seed, t, mode)?;
        mismatches += (joint != central) as usize;
        t += 1;
        if env.step(&joint, &mut env_rng)?.done {
            env.reset(&mut env_rng);
            episode += 1;
            t = 0;
        }
    }
    out.push(check(
        s,
        "grid_views_are_visible_sets",
        wrong_view == 0,
        format!("{steps} steps, {wrong_view} wrong views"),
    ));
    out.push(check(
        s,
        "grid_decentralised_execution",
        mismatches == 0,
        format!("{steps} steps, {mismatches} joint actions differ from central sampling"),
    ));
    Ok(out)
}
