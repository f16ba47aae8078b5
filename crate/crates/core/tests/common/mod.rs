#![allow(dead_code)]

use mackrl_core::approx::{Architecture, Head};
use mackrl_core::partition::{enumerate_pair_partitions, AgentSet, Partition};
use mackrl_core::rng::{keyed_stream, Domain};
use mackrl_core::trainer::Critic;
use mackrl_core::tree::{Evaluation, HeadLayout, Perception, PolicyTree};
use rand::{Rng, RngCore};

/// Each agent's view is a feature vector; the group input is the same vector
/// for every member, so decentralised selection sees consistent inputs.
pub struct Toy {
    pub n: usize,
    pub k: usize,
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub struct ToyView {
    /// Commonly known features.
    pub shared: Vec<f64>,
    /// Private features.
    pub own: Vec<f64>,
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

pub fn random_views(toy: &Toy, rng: &mut impl RngCore) -> Vec<ToyView> {
    let shared: Vec<f64> = (0..toy.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..toy.n)
        .map(|_| ToyView {
            shared: shared.clone(),
            own: (0..toy.dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect()
}

/// A pairwise tree with random parameters of moderate scale.
pub fn random_tree(
    toy: &Toy,
    arch: Architecture,
    share: bool,
    rng: &mut impl RngCore,
) -> PolicyTree {
    let parts = enumerate_pair_partitions(toy.n).unwrap();
    let mut tree = PolicyTree::pairwise(toy, parts, HeadLayout::uniform(arch, share), rng).unwrap();
    let mut p = tree.flat_params();
    for x in &mut p {
        *x = rng.random_range(-1.0..1.0);
    }
    tree.set_flat_params(&p).unwrap();
    tree
}

pub fn all_joint_actions(n: usize, k: usize) -> Vec<Vec<usize>> {
    let total = k.pow(n as u32);
    (0..total)
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

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Probability of `joint` under a three-agent pairwise tree, written out over
/// the three partitions `{ab}{c}` from the per-node distributions alone.
pub fn three_agent_formula(tree: &PolicyTree, ev: &Evaluation, joint: &[usize]) -> f64 {
    assert_eq!(tree.n_agents(), 3);
    let k = tree.n_actions();
    let root = &tree.nodes()[tree.root()];
    let p_root = &ev.probs[tree.root()];
    let mut total = 0.0;
    for (a, b, c) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let part = Partition::new(vec![
            AgentSet::from_members(&[a, b]),
            AgentSet::singleton(c),
        ])
        .unwrap();
        let sel = root.partitions.iter().position(|p| *p == part).unwrap();
        let pair = tree.node_for(AgentSet::from_members(&[a, b])).unwrap();
        let pa = tree.node_for(AgentSet::singleton(a)).unwrap();
        let pb = tree.node_for(AgentSet::singleton(b)).unwrap();
        let pc = tree.node_for(AgentSet::singleton(c)).unwrap();
        let pp = &ev.probs[pair];
        let delegate = tree.nodes()[pair].delegate_index().unwrap();
        let together = pp[joint[a] * k + joint[b]];
        let apart = pp[delegate] * ev.probs[pa][joint[a]] * ev.probs[pb][joint[b]];
        total += p_root[root.n_env + sel] * (together + apart) * ev.probs[pc][joint[c]];
    }
    total
}

/// Same quantity for any pairwise tree: the selector mixes over partitions and
/// each group of a partition acts independently.
pub fn pairwise_formula(tree: &PolicyTree, ev: &Evaluation, joint: &[usize]) -> f64 {
    let k = tree.n_actions();
    let group_prob = |g: AgentSet| -> f64 {
        let m = g.to_vec();
        if m.len() == 1 {
            return ev.probs[tree.node_for(g).unwrap()][joint[m[0]]];
        }
        let id = tree.node_for(g).unwrap();
        let d = tree.nodes()[id].delegate_index().unwrap();
        let solo = |a: usize| ev.probs[tree.node_for(AgentSet::singleton(a)).unwrap()][joint[a]];
        ev.probs[id][joint[m[0]] * k + joint[m[1]]] + ev.probs[id][d] * solo(m[0]) * solo(m[1])
    };
    if tree.n_agents() == 2 {
        return group_prob(AgentSet::all(2));
    }
    let root = &tree.nodes()[tree.root()];
    root.partitions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            ev.probs[tree.root()][root.n_env + i]
                * p.groups().iter().map(|&g| group_prob(g)).product::<f64>()
        })
        .sum()
}

/// Central finite differences.
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

/// Gradient entries below this are compared absolutely; central differences
/// cannot resolve relative error on values that are numerically zero.
pub const FD_FLOOR: f64 = 1e-7;

/// Largest relative error over entries above the floor.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, n)| a.abs().max(n.abs()) >= FD_FLOOR)
        .map(|(a, n)| rel_err(*a, *n))
        .fold(0.0, f64::max)
}

pub fn numeric_grad(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
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

/// Worst relative error of the log joint policy gradient over random trees.
pub fn tree_gradient_error(cases: usize, seed: u64) -> f64 {
    let mut rng = keyed_stream(Domain::Verification, seed, 0, 0);
    let mut worst = 0.0f64;
    for case in 0..cases {
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
        let tree = random_tree(&toy, arch, case % 2 == 0, &mut rng);
        let views = random_views(&toy, &mut rng);
        let joint: Vec<usize> = (0..n).map(|_| rng.random_range(0..toy.k)).collect();
        let eps = [0.0, 0.1, 0.5][case % 3];
        let g = tree
            .log_joint_policy_grad(&toy, &views, &joint, eps)
            .unwrap();
        let mut t = tree.clone();
        let root = tree.nodes()[tree.root()].group;
        let numeric = numeric_grad(&tree.flat_params(), |p| {
            t.set_flat_params(p).unwrap();
            t.joint_policy(&toy, &views, root, &joint, eps)
                .unwrap()
                .ln()
        });
        worst = worst.max(max_rel_err(&g, &numeric));
    }
    worst
}

/// Worst relative error of `J^T c` for every head shape.
pub fn head_gradient_error(per_arch: usize, seed: u64) -> f64 {
    let mut rng = keyed_stream(Domain::Verification, seed, 0, 0);
    let mut worst = 0.0f64;
    let archs = [
        Architecture::Linear,
        Architecture::Tabular,
        Architecture::Mlp { hidden: 5 },
        Architecture::Recurrent { hidden: 4 },
    ];
    for arch in archs {
        for _ in 0..per_arch {
            let mut head = Head::init(arch, 4, 3, &mut rng);
            for p in &mut head.params {
                *p = rng.random_range(-1.0..1.0);
            }
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cot: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let hidden: Option<Vec<f64>> = match arch {
                Architecture::Recurrent { hidden } => {
                    Some((0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect())
                }
                _ => None,
            };
            let g = head.grad(&x, hidden.as_deref(), &cot).unwrap();
            let (_, trace) = head.output_traced(&x).unwrap();
            if hidden.is_none() {
                let mut traced = vec![0.0; g.len()];
                head.accumulate_grad_traced(&x, &trace, &cot, &mut traced)
                    .unwrap();
                worst = worst.max(max_rel_err(&traced, &g));
            }
            let mut h = head.clone();
            let numeric = numeric_grad(&head.params, |p| {
                h.params.copy_from_slice(p);
                let (out, _) = h.forward(&x, hidden.as_deref()).unwrap();
                out.iter().zip(&cot).map(|(o, c)| o * c).sum()
            });
            worst = worst.max(max_rel_err(&g, &numeric));
        }
    }
    worst
}

/// Worst relative error of the critic's squared-error gradient.
pub fn critic_gradient_error(seed: u64) -> f64 {
    let mut rng = keyed_stream(Domain::Verification, seed, 0, 0);
    let mut worst = 0.0f64;
    for arch in [
        Architecture::Linear,
        Architecture::Tabular,
        Architecture::Mlp { hidden: 6 },
    ] {
        let mut critic = Critic::new(arch, 5, &mut rng);
        for p in &mut critic.head.params {
            *p = rng.random_range(-1.0..1.0);
        }
        let xs: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, g) = critic.loss_grad(&xs, &ys).unwrap();
        let mut c = critic.clone();
        let numeric = numeric_grad(&critic.head.params, |p| {
            c.head.params.copy_from_slice(p);
            c.loss_grad(&xs, &ys).unwrap().0
        });
        worst = worst.max(max_rel_err(&g, &numeric));
    }
    worst
}
