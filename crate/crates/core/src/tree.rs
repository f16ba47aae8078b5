//! Hierarchical policy trees over agent groups.
//!
//! Each node is a controller for a group of agents. Its actions are joint
//! environmental actions of the group, partitions of the group into subgroups, or
//! both. Choosing a partition hands control to the subgroups' nodes.
//!
//! A node conditions on the common knowledge of its group, so every member can
//! evaluate it from its own view. With a shared seed, [`PolicyTree::select_action`]
//! lets each agent walk its own branch and still land on its component of one
//! coherent joint action. [`PolicyTree::joint_policy`] sums over every branch to get
//! the probability of a joint action, and [`PolicyTree::accumulate_log_grad`]
//! differentiates its logarithm.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::approx::{argmax, bounded_softmax, softmax, Architecture, Head};
use crate::error::{domain, Error, Result};
use crate::partition::{AgentSet, Partition};
use crate::rng::{keyed_stream, Domain, SharedSeed};
use crate::sampling::{holenstein_sample, inverse_cdf, CategoricalDistribution, HolensteinConfig};

/// How an environment turns one agent's view into controller inputs.
///
/// `group_features` must depend only on what `owner` can deduce about the group's
/// common knowledge, so that all members compute the same vector when their
/// beliefs agree.
pub trait Perception {
    type View;

    fn n_agents(&self) -> usize;
    fn n_actions(&self) -> usize;

    fn group_dim(&self, group_size: usize) -> usize;
    fn group_features(&self, view: &Self::View, owner: usize, group: AgentSet, out: &mut Vec<f64>);

    fn own_dim(&self) -> usize;
    fn own_features(&self, view: &Self::View, agent: usize, out: &mut Vec<f64>);

    /// Centralised input built from every agent's view.
    fn joint_dim(&self) -> usize {
        self.n_agents() * self.own_dim()
    }

    fn joint_features(&self, views: &[Self::View], out: &mut Vec<f64>) {
        for (a, v) in views.iter().enumerate() {
            self.own_features(v, a, out);
        }
    }
}

/// What a node's head receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputSource {
    /// The group's common knowledge, as the evaluating member believes it.
    CommonKnowledge,
    /// The single member's own observation.
    Own,
    /// All agents' observations; such a node can only be run centrally.
    Joint,
}

/// One entry of a node's action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupAction<'a> {
    /// A joint environmental action of the group, as a mixed-radix index over the
    /// members in ascending order (lowest member most significant).
    Env(usize),
    /// Hand control to the subgroups.
    Partition(&'a Partition),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNode {
    pub group: AgentSet,
    /// Size of the joint environmental action space (`0` if none).
    pub n_env: usize,
    pub partitions: Vec<Partition>,
    pub head: usize,
    /// `(slot, width)` of the one-hot index appended to the input.
    pub index: Option<(usize, usize)>,
    pub input: InputSource,
}

impl PolicyNode {
    pub fn n_actions(&self) -> usize {
        self.n_env + self.partitions.len()
    }

    pub fn action(&self, k: usize) -> GroupAction<'_> {
        if k < self.n_env {
            GroupAction::Env(k)
        } else {
            GroupAction::Partition(&self.partitions[k - self.n_env])
        }
    }

    /// Index of the delegation action `{{a}, {b}}`, if the node has one.
    pub fn delegate_index(&self) -> Option<usize> {
        let split = Partition::singletons(self.group);
        self.partitions
            .iter()
            .position(|p| *p == split)
            .map(|i| self.n_env + i)
    }

    pub fn is_pair_controller(&self) -> bool {
        self.group.len() == 2 && self.n_env > 0 && self.delegate_index().is_some()
    }
}

/// Head shapes and sharing for each level of a tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub selector: Architecture,
    pub pair: Architecture,
    pub individual: Architecture,
    /// One head for all pair controllers, with the pair index appended.
    pub share_pairs: bool,
    /// One head for all individual controllers, with the agent index appended.
    pub share_individuals: bool,
}

impl HeadLayout {
    pub fn uniform(arch: Architecture, share: bool) -> Self {
        HeadLayout {
            selector: arch,
            pair: arch,
            individual: arch,
            share_pairs: share,
            share_individuals: share,
        }
    }
}

/// Per-step head inputs and (bounded) action distributions for every node.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub inputs: Vec<Vec<f64>>,
    pub logits: Vec<Vec<f64>>,
    pub softmax: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
    /// Per-node head activations kept for the backward pass.
    pub traces: Vec<Vec<f64>>,
    pub epsilon: f64,
}

/// How a node's action is drawn during decentralised execution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSampler {
    /// Inverse CDF of the node distribution at a shared uniform.
    InverseCdf,
    Holenstein(HolensteinConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMode {
    /// Argmax at every node (evaluation).
    Greedy,
    /// Bounded-softmax sampling at every node.
    Sample { epsilon: f64, sampler: GroupSampler },
}

/// The decisions one traversal made: `(node, action index)`.
pub type Trace = Vec<(usize, usize)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTree {
    n_agents: usize,
    n_actions: usize,
    root: usize,
    nodes: Vec<PolicyNode>,
    lookup: BTreeMap<AgentSet, usize>,
    pub heads: Vec<Head>,
}

struct HeadPlan {
    arch: Architecture,
    inputs: usize,
    outputs: usize,
}

impl PolicyTree {
    /// Pair selector over `partitions`, one pair controller per pair that occurs
    /// in them, and one individual controller per agent. The root is node 0.
    pub fn pairwise<P: Perception>(
        perception: &P,
        partitions: Vec<Partition>,
        layout: HeadLayout,
        rng: &mut impl RngCore,
    ) -> Result<Self> {
        let n = perception.n_agents();
        let k = perception.n_actions();
        let all = AgentSet::all(n);
        if partitions.is_empty() {
            return Err(domain("pair selector needs at least one partition"));
        }
        for p in &partitions {
            if p.covered() != all || !p.is_pairwise() {
                return Err(domain(format!(
                    "{p} is not a pairwise partition of all agents"
                )));
            }
        }
        let mut pairs: Vec<AgentSet> = partitions
            .iter()
            .flat_map(|p| p.groups().iter().copied().filter(|g| g.len() == 2))
            .collect();
        pairs.sort();
        pairs.dedup();

        let mut nodes = Vec::new();
        let mut plans = Vec::new();
        // With two agents the only partition is the pair itself, whose controller
        // becomes the root.
        if n > 2 {
            plans.push(HeadPlan {
                arch: layout.selector,
                inputs: perception.group_dim(n),
                outputs: partitions.len(),
            });
            nodes.push(PolicyNode {
                group: all,
                n_env: 0,
                partitions,
                head: 0,
                index: None,
                input: InputSource::CommonKnowledge,
            });
        }
        let pair_in = perception.group_dim(2);
        let shared_pair = layout.share_pairs && pairs.len() > 1;
        if shared_pair {
            plans.push(HeadPlan {
                arch: layout.pair,
                inputs: pair_in + pairs.len(),
                outputs: k * k + 1,
            });
        }
        for (i, &g) in pairs.iter().enumerate() {
            let head = if shared_pair {
                plans.len() - 1
            } else {
                plans.push(HeadPlan {
                    arch: layout.pair,
                    inputs: pair_in,
                    outputs: k * k + 1,
                });
                plans.len() - 1
            };
            nodes.push(PolicyNode {
                group: g,
                n_env: k * k,
                partitions: vec![Partition::singletons(g)],
                head,
                index: shared_pair.then_some((i, pairs.len())),
                input: InputSource::CommonKnowledge,
            });
        }
        Self::push_individuals(perception, layout, &mut nodes, &mut plans);
        Self::finish(n, k, 0, nodes, plans, rng)
    }

    /// Independent actors: a root that always delegates to every agent.
    pub fn independent<P: Perception>(
        perception: &P,
        layout: HeadLayout,
        rng: &mut impl RngCore,
    ) -> Result<Self> {
        let n = perception.n_agents();
        let all = AgentSet::all(n);
        let mut nodes = vec![PolicyNode {
            group: all,
            n_env: 0,
            partitions: vec![Partition::singletons(all)],
            head: 0,
            index: None,
            input: InputSource::CommonKnowledge,
        }];
        let mut plans = vec![HeadPlan {
            arch: Architecture::Linear,
            inputs: perception.group_dim(n),
            outputs: 1,
        }];
        Self::push_individuals(perception, layout, &mut nodes, &mut plans);
        Self::finish(n, perception.n_actions(), 0, nodes, plans, rng)
    }

    /// A single controller over the joint action space of all agents.
    ///
    /// With [`InputSource::Joint`] this is centralised joint-action learning; with
    /// [`InputSource::CommonKnowledge`] it only sees what all agents commonly know.
    pub fn joint<P: Perception>(
        perception: &P,
        input: InputSource,
        arch: Architecture,
        rng: &mut impl RngCore,
    ) -> Result<Self> {
        let n = perception.n_agents();
        let k = perception.n_actions();
        let inputs = match input {
            InputSource::Joint => perception.joint_dim(),
            InputSource::CommonKnowledge => perception.group_dim(n),
            InputSource::Own => {
                return Err(domain("joint controller cannot use a single agent's input"))
            }
        };
        let outputs = k
            .checked_pow(n as u32)
            .ok_or_else(|| domain("joint action space too large"))?;
        let nodes = vec![PolicyNode {
            group: AgentSet::all(n),
            n_env: outputs,
            partitions: Vec::new(),
            head: 0,
            index: None,
            input,
        }];
        let plans = vec![HeadPlan {
            arch,
            inputs,
            outputs,
        }];
        Self::finish(n, k, 0, nodes, plans, rng)
    }

    fn push_individuals<P: Perception>(
        perception: &P,
        layout: HeadLayout,
        nodes: &mut Vec<PolicyNode>,
        plans: &mut Vec<HeadPlan>,
    ) {
        let n = perception.n_agents();
        let k = perception.n_actions();
        let own = perception.own_dim();
        let shared = if layout.share_individuals {
            plans.push(HeadPlan {
                arch: layout.individual,
                inputs: own + n,
                outputs: k,
            });
            Some(plans.len() - 1)
        } else {
            None
        };
        for a in 0..n {
            let head = shared.unwrap_or_else(|| {
                plans.push(HeadPlan {
                    arch: layout.individual,
                    inputs: own,
                    outputs: k,
                });
                plans.len() - 1
            });
            nodes.push(PolicyNode {
                group: AgentSet::singleton(a),
                n_env: k,
                partitions: Vec::new(),
                head,
                index: shared.map(|_| (a, n)),
                input: InputSource::Own,
            });
        }
    }

    fn finish(
        n_agents: usize,
        n_actions: usize,
        root: usize,
        nodes: Vec<PolicyNode>,
        plans: Vec<HeadPlan>,
        rng: &mut impl RngCore,
    ) -> Result<Self> {
        if plans
            .iter()
            .any(|p| matches!(p.arch, Architecture::Recurrent { .. }))
        {
            return Err(domain("policy trees use feed-forward heads"));
        }
        let heads = plans
            .into_iter()
            .map(|p| Head::init(p.arch, p.inputs, p.outputs, rng))
            .collect();
        let lookup = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.group, i))
            .collect();
        let tree = PolicyTree {
            n_agents,
            n_actions,
            root,
            nodes,
            lookup,
            heads,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Every partition action must lead to existing nodes.
    pub fn validate(&self) -> Result<()> {
        for node in &self.nodes {
            if node.head >= self.heads.len() {
                return Err(Error::Structure(format!(
                    "node {:?} refers to missing head {}",
                    node.group, node.head
                )));
            }
            if self.heads[node.head].outputs != node.n_actions() {
                return Err(Error::Structure(format!(
                    "head of node {:?} has the wrong output width",
                    node.group
                )));
            }
            for p in &node.partitions {
                if p.covered() != node.group {
                    return Err(Error::Structure(format!(
                        "{p} does not cover {:?}",
                        node.group
                    )));
                }
                for g in p.groups() {
                    if *g == node.group && p.groups().len() == 1 {
                        return Err(Error::Structure(
                            "partition maps a group onto itself".into(),
                        ));
                    }
                    if !self.lookup.contains_key(g) {
                        return Err(Error::Structure(format!(
                            "no controller for subgroup {g:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn nodes(&self) -> &[PolicyNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node_for(&self, group: AgentSet) -> Option<usize> {
        self.lookup.get(&group).copied()
    }

    /// Whether every node can be evaluated from a single member's view.
    pub fn is_decentralised(&self) -> bool {
        self.nodes.iter().all(|n| n.input != InputSource::Joint)
    }

    /// Replaces a node's partitions; used by tests to build unusual trees.
    pub fn nodes_mut(&mut self) -> &mut [PolicyNode] {
        &mut self.nodes
    }

    pub fn param_count(&self) -> usize {
        self.heads.iter().map(|h| h.param_len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.heads
            .iter()
            .map(|h| vec![0.0; h.param_len()])
            .collect()
    }

    /// Mixed-radix index of the group's restriction of `joint`.
    pub fn restrict(&self, group: AgentSet, joint: &[usize]) -> usize {
        group
            .members()
            .fold(0, |acc, a| acc * self.n_actions + joint[a])
    }

    /// Component of `agent` in a group joint-action index.
    pub fn component(&self, group: AgentSet, index: usize, agent: usize) -> usize {
        let members = group.to_vec();
        let pos = members
            .iter()
            .position(|&m| m == agent)
            .expect("agent in group");
        let shift = members.len() - 1 - pos;
        (index / self.n_actions.pow(shift as u32)) % self.n_actions
    }

    fn node_input<P: Perception>(
        &self,
        node: &PolicyNode,
        perception: &P,
        owner: usize,
        view: &P::View,
        all_views: Option<&[P::View]>,
    ) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.heads[node.head].inputs);
        match node.input {
            InputSource::CommonKnowledge => {
                perception.group_features(view, owner, node.group, &mut x)
            }
            InputSource::Own => perception.own_features(view, owner, &mut x),
            InputSource::Joint => match all_views {
                Some(v) => perception.joint_features(v, &mut x),
                None => {
                    return Err(Error::Structure(
                        "centralised node reached during decentralised execution".into(),
                    ))
                }
            },
        }
        if let Some((slot, width)) = node.index {
            let base = x.len();
            x.resize(base + width, 0.0);
            x[base + slot] = 1.0;
        }
        Ok(x)
    }

    /// Evaluates every node, using the lowest-indexed member's view for each group.
    pub fn evaluate<P: Perception>(
        &self,
        perception: &P,
        views: &[P::View],
        epsilon: f64,
    ) -> Result<Evaluation> {
        if views.len() != self.n_agents {
            return Err(domain(format!(
                "expected {} views, got {}",
                self.n_agents,
                views.len()
            )));
        }
        let mut ev = Evaluation {
            inputs: Vec::with_capacity(self.nodes.len()),
            logits: Vec::with_capacity(self.nodes.len()),
            softmax: Vec::with_capacity(self.nodes.len()),
            probs: Vec::with_capacity(self.nodes.len()),
            traces: Vec::with_capacity(self.nodes.len()),
            epsilon,
        };
        for node in &self.nodes {
            let owner = node.group.first().expect("nonempty group");
            let x = self.node_input(node, perception, owner, &views[owner], Some(views))?;
            let (logits, trace) = self.heads[node.head].output_traced(&x)?;
            let sm = softmax(&logits);
            let n = sm.len() as f64;
            let probs = sm
                .iter()
                .map(|p| (1.0 - epsilon) * p + epsilon / n)
                .collect();
            ev.inputs.push(x);
            ev.traces.push(trace);
            ev.logits.push(logits);
            ev.softmax.push(sm);
            ev.probs.push(probs);
        }
        Ok(ev)
    }

    fn check_joint(&self, joint: &[usize]) -> Result<()> {
        if joint.len() != self.n_agents || joint.iter().any(|&u| u >= self.n_actions) {
            return Err(domain(format!(
                "joint action {joint:?} is outside the action space"
            )));
        }
        Ok(())
    }

    /// Probability that the controller of `group` produces the group's part of
    /// `joint`, summing over all of its partition choices.
    pub fn joint_policy_from(
        &self,
        ev: &Evaluation,
        group: AgentSet,
        joint: &[usize],
    ) -> Result<f64> {
        self.check_joint(joint)?;
        let mut memo = BTreeMap::new();
        let mut order = Vec::new();
        self.forward_prob(ev, group, joint, &mut memo, &mut order)
    }

    /// Probability of `joint` under the whole tree.
    pub fn joint_policy<P: Perception>(
        &self,
        perception: &P,
        views: &[P::View],
        group: AgentSet,
        joint: &[usize],
        epsilon: f64,
    ) -> Result<f64> {
        let ev = self.evaluate(perception, views, epsilon)?;
        self.joint_policy_from(&ev, group, joint)
    }

    fn forward_prob(
        &self,
        ev: &Evaluation,
        group: AgentSet,
        joint: &[usize],
        memo: &mut BTreeMap<AgentSet, f64>,
        order: &mut Vec<AgentSet>,
    ) -> Result<f64> {
        if let Some(&p) = memo.get(&group) {
            return Ok(p);
        }
        let id = self
            .node_for(group)
            .ok_or_else(|| Error::Structure(format!("no controller for group {group:?}")))?;
        let node = &self.nodes[id];
        let probs = &ev.probs[id];
        let mut p = 0.0;
        if node.n_env > 0 {
            p += probs[self.restrict(group, joint)];
        }
        for (j, part) in node.partitions.iter().enumerate() {
            let mut prod = probs[node.n_env + j];
            for &g in part.groups() {
                prod *= self.forward_prob(ev, g, joint, memo, order)?;
            }
            p += prod;
        }
        memo.insert(group, p);
        order.push(group);
        Ok(p)
    }

    /// Adds `scale * d log pi(joint) / d theta` to `grads` and returns `log pi(joint)`.
    pub fn accumulate_log_grad_from(
        &self,
        ev: &Evaluation,
        joint: &[usize],
        scale: f64,
        grads: &mut [Vec<f64>],
    ) -> Result<f64> {
        self.check_joint(joint)?;
        let root_group = self.nodes[self.root].group;
        let mut memo = BTreeMap::new();
        let mut order = Vec::new();
        let p_root = self.forward_prob(ev, root_group, joint, &mut memo, &mut order)?;
        if !(p_root > 0.0) {
            return Err(domain(format!(
                "joint action {joint:?} has probability zero"
            )));
        }
        // Reverse sweep: parents are visited before their subgroups.
        let mut adjoint: BTreeMap<AgentSet, f64> = BTreeMap::new();
        adjoint.insert(root_group, 1.0);
        let mut node_adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for &group in order.iter().rev() {
            let a = adjoint.get(&group).copied().unwrap_or(0.0);
            if a == 0.0 {
                continue;
            }
            let id = self.lookup[&group];
            let node = &self.nodes[id];
            let probs = &ev.probs[id];
            let dp = node_adj[id].get_or_insert_with(|| vec![0.0; node.n_actions()]);
            if node.n_env > 0 {
                dp[self.restrict(group, joint)] += a;
            }
            for (j, part) in node.partitions.iter().enumerate() {
                let k = node.n_env + j;
                let subs: Vec<f64> = part.groups().iter().map(|g| memo[g]).collect();
                dp[k] += a * subs.iter().product::<f64>();
                for (i, &g) in part.groups().iter().enumerate() {
                    let others: f64 = subs
                        .iter()
                        .enumerate()
                        .filter(|(m, _)| *m != i)
                        .map(|(_, v)| v)
                        .product();
                    *adjoint.entry(g).or_insert(0.0) += a * probs[k] * others;
                }
            }
        }
        let factor = scale / p_root;
        for (id, dp) in node_adj.into_iter().enumerate() {
            if let Some(dp) = dp {
                self.node_backward(ev, id, &dp, factor, grads)?;
            }
        }
        Ok(libm::log(p_root))
    }

    /// Pulls `factor * dp`, a cotangent on node `id`'s bounded probabilities,
    /// back through the bounded softmax and the head.
    fn node_backward(
        &self,
        ev: &Evaluation,
        id: usize,
        dp: &[f64],
        factor: f64,
        grads: &mut [Vec<f64>],
    ) -> Result<()> {
        let keep = 1.0 - ev.epsilon;
        let sm = &ev.softmax[id];
        let dot: f64 = dp.iter().zip(sm).map(|(d, s)| d * s).sum();
        let cot: Vec<f64> = dp
            .iter()
            .zip(sm)
            .map(|(d, s)| factor * keep * s * (d - dot))
            .collect();
        let node = &self.nodes[id];
        self.heads[node.head].accumulate_grad_traced(
            &ev.inputs[id],
            &ev.traces[id],
            &cot,
            &mut grads[node.head],
        )
    }

    /// Adds `scale * d log p_node(action) / d theta` for one node's own
    /// distribution and returns the log-probability.
    pub fn accumulate_node_log_grad(
        &self,
        ev: &Evaluation,
        id: usize,
        action: usize,
        scale: f64,
        grads: &mut [Vec<f64>],
    ) -> Result<f64> {
        let probs = ev
            .probs
            .get(id)
            .ok_or_else(|| domain(format!("unknown node {id}")))?;
        let p = *probs
            .get(action)
            .ok_or_else(|| domain(format!("action {action} outside node {id}")))?;
        if !(p > 0.0) {
            return Err(domain(format!(
                "action {action} of node {id} has probability zero"
            )));
        }
        let mut dp = vec![0.0; probs.len()];
        dp[action] = 1.0;
        self.node_backward(ev, id, &dp, scale / p, grads)?;
        Ok(libm::log(p))
    }

    pub fn accumulate_log_grad<P: Perception>(
        &self,
        perception: &P,
        views: &[P::View],
        joint: &[usize],
        epsilon: f64,
        scale: f64,
        grads: &mut [Vec<f64>],
    ) -> Result<f64> {
        let ev = self.evaluate(perception, views, epsilon)?;
        self.accumulate_log_grad_from(&ev, joint, scale, grads)
    }

    /// Gradient of `log pi(joint)` with respect to all head parameters, flattened
    /// in head order.
    pub fn log_joint_policy_grad<P: Perception>(
        &self,
        perception: &P,
        views: &[P::View],
        joint: &[usize],
        epsilon: f64,
    ) -> Result<Vec<f64>> {
        let mut g = self.zero_grads();
        self.accumulate_log_grad(perception, views, joint, epsilon, 1.0, &mut g)?;
        Ok(g.concat())
    }

    /// Sets the initial logit of every pair controller's delegation action.
    pub fn set_delegate_bias(&mut self, bias: f64) {
        for node in &self.nodes {
            if let (true, Some(d)) = (node.is_pair_controller(), node.delegate_index()) {
                self.heads[node.head].set_output_offset(d, bias);
            }
        }
    }

    /// Flattened parameters in head order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.heads
            .iter()
            .flat_map(|h| h.params.iter().copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut rest = flat;
        for h in &mut self.heads {
            let (a, b) = rest.split_at(h.params.len());
            h.params.copy_from_slice(a);
            rest = b;
        }
        Ok(())
    }

    fn choose(
        &self,
        node_id: usize,
        logits: &[f64],
        mode: SelectionMode,
        seed: &SharedSeed,
        t: u64,
    ) -> Result<usize> {
        match mode {
            SelectionMode::Greedy => Ok(argmax(logits)),
            SelectionMode::Sample { epsilon, sampler } => {
                let probs = bounded_softmax(logits, epsilon);
                match sampler {
                    GroupSampler::InverseCdf => {
                        Ok(inverse_cdf(&probs, seed.node_uniform(t, node_id)))
                    }
                    GroupSampler::Holenstein(cfg) => {
                        let dist = CategoricalDistribution::new(normalise(probs))?;
                        holenstein_sample(&dist, &cfg, seed.node_stream(t, node_id))
                    }
                }
            }
        }
    }

    /// Decentralised action selection for `agent` from its own view only.
    ///
    /// Starting at the root, the agent samples its group's controller; while the
    /// sample is a partition it moves to the subgroup that contains it and samples
    /// again. Returns the agent's component of the final joint action and the path.
    pub fn select_action_traced<P: Perception>(
        &self,
        perception: &P,
        agent: usize,
        view: &P::View,
        seed: &SharedSeed,
        t: u64,
        mode: SelectionMode,
    ) -> Result<(usize, Trace)> {
        if agent >= self.n_agents {
            return Err(domain(format!("unknown agent {agent}")));
        }
        let mut id = self.root;
        let mut trace = Vec::new();
        // Depth is bounded by the number of strictly shrinking subgroups.
        for _ in 0..=self.n_agents {
            let node = &self.nodes[id];
            let x = self.node_input(node, perception, agent, view, None)?;
            let logits = self.heads[node.head].output(&x)?;
            let k = self.choose(id, &logits, mode, seed, t)?;
            trace.push((id, k));
            match node.action(k) {
                GroupAction::Env(idx) => {
                    return Ok((self.component(node.group, idx, agent), trace))
                }
                GroupAction::Partition(p) => {
                    let g = p.group_of(agent).ok_or_else(|| {
                        Error::Structure(format!("{p} does not contain agent {agent}"))
                    })?;
                    id = self.node_for(g).ok_or_else(|| {
                        Error::Structure(format!("no controller for subgroup {g:?}"))
                    })?;
                }
            }
        }
        Err(Error::Structure(
            "partition chain does not terminate".into(),
        ))
    }

    pub fn select_action<P: Perception>(
        &self,
        perception: &P,
        agent: usize,
        view: &P::View,
        seed: &SharedSeed,
        t: u64,
        mode: SelectionMode,
    ) -> Result<usize> {
        Ok(self
            .select_action_traced(perception, agent, view, seed, t, mode)?
            .0)
    }

    /// Central traversal of every reached branch, each group evaluated by its
    /// lowest member. Draws from the same node streams as [`Self::select_action`].
    pub fn sample_joint<P: Perception>(
        &self,
        perception: &P,
        views: &[P::View],
        seed: &SharedSeed,
        t: u64,
        mode: SelectionMode,
    ) -> Result<(Vec<usize>, Trace)> {
        let mut joint = vec![usize::MAX; self.n_agents];
        let mut trace = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let owner = node.group.first().expect("nonempty");
            let x = self.node_input(node, perception, owner, &views[owner], Some(views))?;
            let logits = self.heads[node.head].output(&x)?;
            let k = self.choose(id, &logits, mode, seed, t)?;
            trace.push((id, k));
            match node.action(k) {
                GroupAction::Env(idx) => {
                    for a in node.group.members() {
                        joint[a] = self.component(node.group, idx, a);
                    }
                }
                GroupAction::Partition(p) => {
                    for g in p.groups().iter().rev() {
                        stack.push(self.node_for(*g).ok_or_else(|| {
                            Error::Structure(format!("no controller for subgroup {g:?}"))
                        })?);
                    }
                }
            }
        }
        Ok((joint, trace))
    }
}

fn normalise(mut p: Vec<f64>) -> Vec<f64> {
    let s: f64 = p.iter().sum();
    for x in &mut p {
        *x /= s;
    }
    p
}

/// A stream for drawing tree initialisations from a run seed.
pub fn init_stream(seed: u64) -> rand_chacha::ChaCha8Rng {
    keyed_stream(Domain::Initialisation, seed, 0, 0)
}
