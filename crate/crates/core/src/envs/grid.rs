//! A field-of-view gridworld where pairs of agents must cooperate to capture prey.
//!
//! Agents and static prey live on a square grid. Every entity has features
//! `[x, y, type]` and every agent sees the entities within a commonly known radius,
//! so the common knowledge of a group is whatever its mutually visible members all
//! see. A prey is captured when at least two agents next to it choose `Capture` in
//! the same step.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvRng, Environment, Transition};
use crate::ck::{
    belief_common_knowledge, observe, AgentObservation, CircularFov, EntityId, EntityKind,
    EntityState, WorldState,
};
use crate::error::{domain, Result};
use crate::partition::AgentSet;
use crate::tree::Perception;

const AGENT_TYPE: f64 = 0.0;
const PREY_TYPE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Stay,
    Up,
    Down,
    Left,
    Right,
    Capture,
}

impl GridAction {
    pub const COUNT: usize = 6;

    pub fn from_index(i: usize) -> Result<Self> {
        Ok(match i {
            0 => GridAction::Stay,
            1 => GridAction::Up,
            2 => GridAction::Down,
            3 => GridAction::Left,
            4 => GridAction::Right,
            5 => GridAction::Capture,
            _ => return Err(domain(format!("invalid gridworld action {i}"))),
        })
    }

    fn delta(self) -> (i64, i64) {
        match self {
            GridAction::Up => (0, 1),
            GridAction::Down => (0, -1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
            GridAction::Stay | GridAction::Capture => (0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridWorldConfig {
    pub size: usize,
    pub n_agents: usize,
    pub n_prey: usize,
    pub radius: f64,
    pub horizon: usize,
    pub capture_reward: f64,
    pub step_penalty: f64,
}

impl Default for GridWorldConfig {
    fn default() -> Self {
        GridWorldConfig {
            size: 8,
            n_agents: 4,
            n_prey: 2,
            radius: 2.5,
            horizon: 40,
            capture_reward: 1.0,
            step_penalty: -0.01,
        }
    }
}

impl GridWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 || self.n_agents > 16 {
            return Err(domain(format!(
                "gridworld needs 2..=16 agents, got {}",
                self.n_agents
            )));
        }
        if self.size < 2 || self.n_agents + self.n_prey > self.size * self.size {
            return Err(domain("grid too small for its entities"));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(domain("radius must be positive"));
        }
        if self.horizon == 0 {
            return Err(domain("horizon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub config: GridWorldConfig,
    agents: Vec<(i64, i64)>,
    prey: Vec<(i64, i64)>,
    t: usize,
    mask: CircularFov,
}

fn chebyshev(a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

impl GridWorld {
    pub fn new(config: GridWorldConfig) -> Result<Self> {
        config.validate()?;
        let agents = (0..config.n_agents)
            .map(|i| ((i % config.size) as i64, (i / config.size) as i64))
            .collect();
        let prey = (0..config.n_prey)
            .map(|i| {
                let c = config.size * config.size - 1 - i;
                ((c % config.size) as i64, (c / config.size) as i64)
            })
            .collect();
        Ok(GridWorld {
            config,
            agents,
            prey,
            t: 0,
            mask: CircularFov::new(config.radius),
        })
    }

    /// Places entities explicitly; used to set up test scenarios.
    pub fn with_positions(
        config: GridWorldConfig,
        agents: Vec<(i64, i64)>,
        prey: Vec<(i64, i64)>,
    ) -> Result<Self> {
        let mut g = Self::new(config)?;
        if agents.len() != config.n_agents || prey.len() != config.n_prey {
            return Err(domain("entity counts do not match the config"));
        }
        let s = config.size as i64;
        if agents
            .iter()
            .chain(&prey)
            .any(|&(x, y)| x < 0 || y < 0 || x >= s || y >= s)
        {
            return Err(domain("position outside the grid"));
        }
        g.agents = agents;
        g.prey = prey;
        Ok(g)
    }

    pub fn mask(&self) -> &CircularFov {
        &self.mask
    }

    pub fn agent_positions(&self) -> &[(i64, i64)] {
        &self.agents
    }

    pub fn prey_positions(&self) -> &[(i64, i64)] {
        &self.prey
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// Agents take ids `0..n_agents`, prey follow.
    pub fn world_state(&self) -> WorldState {
        let n = self.config.n_agents;
        let mut es = Vec::with_capacity(n + self.config.n_prey);
        for (i, &(x, y)) in self.agents.iter().enumerate() {
            es.push(EntityState::new(
                i as u32,
                EntityKind::Agent,
                vec![x as f64, y as f64, AGENT_TYPE],
            ));
        }
        for (j, &(x, y)) in self.prey.iter().enumerate() {
            es.push(EntityState::new(
                (n + j) as u32,
                EntityKind::Other,
                vec![x as f64, y as f64, PREY_TYPE],
            ));
        }
        WorldState::new(es).expect("ids are distinct")
    }

    fn free_cell(&self, rng: &mut EnvRng) -> (i64, i64) {
        let s = self.config.size as i64;
        let taken: BTreeSet<(i64, i64)> = self.agents.iter().chain(&self.prey).copied().collect();
        let free: Vec<(i64, i64)> = (0..s)
            .flat_map(|x| (0..s).map(move |y| (x, y)))
            .filter(|c| !taken.contains(c))
            .collect();
        free[rng.random_range(0..free.len())]
    }

    fn slot_count(&self) -> usize {
        self.config.n_agents + self.config.n_prey
    }

    fn norm(&self) -> f64 {
        (self.config.size - 1) as f64
    }

    fn group_ids(group: AgentSet) -> BTreeSet<EntityId> {
        group.members().map(|a| EntityId(a as u32)).collect()
    }

    /// The belief of `owner` about the common knowledge of `group`.
    pub fn believed_common_knowledge(
        &self,
        view: &AgentObservation,
        group: AgentSet,
    ) -> BTreeSet<EntityId> {
        belief_common_knowledge(view, &Self::group_ids(group), &self.mask)
            .map(|b| b.entities)
            .unwrap_or_default()
    }
}

impl Perception for GridWorld {
    type View = AgentObservation;

    fn n_agents(&self) -> usize {
        self.config.n_agents
    }

    fn n_actions(&self) -> usize {
        GridAction::COUNT
    }

    /// No-CK flag, member positions, then for every non-member entity slot:
    /// presence, offset to each member, and whether it is adjacent to a member.
    fn group_dim(&self, group_size: usize) -> usize {
        1 + 2 * group_size + (self.slot_count() - group_size) * (2 + 2 * group_size)
    }

    fn group_features(
        &self,
        view: &AgentObservation,
        _owner: usize,
        group: AgentSet,
        out: &mut Vec<f64>,
    ) {
        let size = group.len();
        let base = out.len();
        out.resize(base + self.group_dim(size), 0.0);
        let belief = match belief_common_knowledge(view, &Self::group_ids(group), &self.mask) {
            Ok(b) if !b.is_empty() => b,
            _ => {
                out[base] = 1.0;
                return;
            }
        };
        let members: Vec<&EntityState> = group
            .members()
            .filter_map(|a| belief.observation.iter().find(|e| e.id.0 == a as u32))
            .collect();
        let norm = self.norm();
        let r = self.config.radius;
        let mut i = base + 1;
        for m in &members {
            out[i] = m.features[0] / norm;
            out[i + 1] = m.features[1] / norm;
            i += 2;
        }
        for slot in 0..self.slot_count() {
            if slot < self.config.n_agents && group.contains(slot) {
                continue;
            }
            if let Some(e) = belief.observation.iter().find(|e| e.id.0 == slot as u32) {
                out[i] = 1.0;
                let mut adjacent = false;
                for (k, m) in members.iter().enumerate() {
                    let dx = e.features[0] - m.features[0];
                    let dy = e.features[1] - m.features[1];
                    out[i + 1 + 2 * k] = dx / r;
                    out[i + 2 + 2 * k] = dy / r;
                    adjacent |= dx.abs() <= 1.0 && dy.abs() <= 1.0;
                }
                out[i + 1 + 2 * size] = adjacent as u8 as f64;
            }
            i += 2 + 2 * size;
        }
    }

    /// Own position, then presence, offset and adjacency for every other slot.
    fn own_dim(&self) -> usize {
        2 + (self.slot_count() - 1) * 4
    }

    fn own_features(&self, view: &AgentObservation, agent: usize, out: &mut Vec<f64>) {
        let base = out.len();
        out.resize(base + self.own_dim(), 0.0);
        let Some(me) = view.get(EntityId(agent as u32)) else {
            return;
        };
        let norm = self.norm();
        let r = self.config.radius;
        out[base] = me.features[0] / norm;
        out[base + 1] = me.features[1] / norm;
        let mut i = base + 2;
        for slot in 0..self.slot_count() {
            if slot == agent {
                continue;
            }
            if let Some(e) = view.get(EntityId(slot as u32)) {
                let dx = e.features[0] - me.features[0];
                let dy = e.features[1] - me.features[1];
                out[i] = 1.0;
                out[i + 1] = dx / r;
                out[i + 2] = dy / r;
                out[i + 3] = (dx.abs() <= 1.0 && dy.abs() <= 1.0) as u8 as f64;
            }
            i += 4;
        }
    }
}

impl Environment for GridWorld {
    fn reset(&mut self, rng: &mut EnvRng) {
        self.t = 0;
        self.agents.clear();
        self.prey.clear();
        for _ in 0..self.config.n_agents {
            let c = self.free_cell(rng);
            self.agents.push(c);
        }
        for _ in 0..self.config.n_prey {
            let c = self.free_cell(rng);
            self.prey.push(c);
        }
    }

    fn views(&self) -> Vec<AgentObservation> {
        let ws = self.world_state();
        (0..self.config.n_agents)
            .map(|a| observe(&ws, EntityId(a as u32), &self.mask).expect("agent exists"))
            .collect()
    }

    fn step(&mut self, joint: &[usize], rng: &mut EnvRng) -> Result<Transition> {
        if joint.len() != self.config.n_agents {
            return Err(domain(format!(
                "expected {} actions, got {}",
                self.config.n_agents,
                joint.len()
            )));
        }
        let actions: Vec<GridAction> = joint
            .iter()
            .map(|&u| GridAction::from_index(u))
            .collect::<Result<_>>()?;
        let mut reward = self.config.step_penalty;
        let mut captured = Vec::new();
        for (j, &p) in self.prey.iter().enumerate() {
            let n = self
                .agents
                .iter()
                .zip(&actions)
                .filter(|(&a, &u)| u == GridAction::Capture && chebyshev(a, p) <= 1)
                .count();
            if n >= 2 {
                captured.push(j);
                reward += self.config.capture_reward;
            }
        }
        let s = self.config.size as i64;
        for (a, u) in actions.iter().enumerate() {
            let (dx, dy) = u.delta();
            let (x, y) = (self.agents[a].0 + dx, self.agents[a].1 + dy);
            if x >= 0 && y >= 0 && x < s && y < s && !self.prey.contains(&(x, y)) {
                self.agents[a] = (x, y);
            }
        }
        for j in captured {
            // Off-grid while drawing so the old cell counts as free.
            self.prey[j] = (-1, -1);
            self.prey[j] = self.free_cell(rng);
        }
        self.t += 1;
        Ok(Transition {
            reward,
            done: self.t >= self.config.horizon,
        })
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    /// Entity positions, the elapsed fraction of the episode, then for every prey
    /// the offset and adjacency of each agent and whether a capture is possible.
    fn state_dim(&self) -> usize {
        let n = self.config.n_agents;
        2 * self.slot_count() + 1 + self.config.n_prey * (3 * n + 1)
    }

    fn state_features(&self, out: &mut Vec<f64>) {
        let norm = self.norm();
        for &(x, y) in self.agents.iter().chain(&self.prey) {
            out.push(x as f64 / norm);
            out.push(y as f64 / norm);
        }
        out.push(self.t as f64 / self.config.horizon as f64);
        for &p in &self.prey {
            let mut adjacent = 0;
            for &a in &self.agents {
                out.push((p.0 - a.0) as f64 / norm);
                out.push((p.1 - a.1) as f64 / norm);
                let adj = chebyshev(a, p) <= 1;
                adjacent += adj as usize;
                out.push(adj as u8 as f64);
            }
            out.push((adjacent >= 2) as u8 as f64);
        }
    }

    /// Prey in the believed common knowledge.
    fn ck_richness(
        &self,
        view: &AgentObservation,
        _owner: usize,
        group: AgentSet,
    ) -> Option<usize> {
        let ck = self.believed_common_knowledge(view, group);
        let n = self.config.n_agents as u32;
        (!ck.is_empty()).then(|| ck.iter().filter(|e| e.0 >= n).count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ck::{common_knowledge_closed_form, visible_set};
    use crate::rng::{keyed_stream, Domain};

    fn cfg() -> GridWorldConfig {
        GridWorldConfig::default()
    }

    #[test]
    fn lone_agent_sees_only_itself() {
        let g = GridWorld::with_positions(
            cfg(),
            vec![(0, 0), (7, 7), (0, 7), (7, 0)],
            vec![(4, 4), (3, 4)],
        )
        .unwrap();
        let v = g.views();
        assert_eq!(
            v[0].ids().into_iter().collect::<Vec<_>>(),
            vec![EntityId(0)]
        );
    }

    #[test]
    fn mutually_visible_pair_has_common_knowledge() {
        let g = GridWorld::with_positions(
            cfg(),
            vec![(0, 0), (1, 1), (7, 7), (7, 0)],
            vec![(2, 0), (5, 5)],
        )
        .unwrap();
        let ws = g.world_state();
        let pair: BTreeSet<EntityId> = [EntityId(0), EntityId(1)].into_iter().collect();
        let ck = common_knowledge_closed_form(&ws, &pair, g.mask()).unwrap();
        assert!(ck.entities.is_superset(&pair));
        assert!(ck.entities.contains(&EntityId(4)));
        let v = g.views();
        assert_eq!(
            g.believed_common_knowledge(&v[0], AgentSet::from_members(&[0, 1])),
            ck.entities
        );
        assert_eq!(
            g.believed_common_knowledge(&v[1], AgentSet::from_members(&[0, 1])),
            ck.entities
        );
    }

    #[test]
    fn ck_richness_counts_prey_in_common_knowledge() {
        let g = GridWorld::with_positions(
            cfg(),
            vec![(0, 0), (1, 1), (7, 7), (7, 0)],
            vec![(2, 0), (5, 5)],
        )
        .unwrap();
        let v = g.views();
        let pair = AgentSet::from_members(&[0, 1]);
        assert_eq!(g.ck_richness(&v[0], 0, pair), Some(1));
        assert_eq!(g.ck_richness(&v[1], 1, pair), Some(1));
        let apart = AgentSet::from_members(&[2, 3]);
        assert_eq!(g.ck_richness(&v[2], 2, apart), None);
    }

    #[test]
    fn observation_is_exactly_the_visible_set() {
        let mut g = GridWorld::new(cfg()).unwrap();
        let mut rng = keyed_stream(Domain::Verification, 3, 0, 0);
        for _ in 0..50 {
            g.reset(&mut rng);
            let ws = g.world_state();
            for (a, v) in g.views().iter().enumerate() {
                let m = visible_set(&ws, EntityId(a as u32), g.mask()).unwrap();
                assert_eq!(v.ids(), m);
                for e in &v.entities {
                    assert_eq!(Some(e), ws.entity(e.id));
                }
            }
        }
    }

    #[test]
    fn capture_needs_two_agents() {
        let c = cfg();
        let mut rng = keyed_stream(Domain::Verification, 4, 0, 0);
        let mut g = GridWorld::with_positions(
            c,
            vec![(1, 1), (7, 7), (0, 7), (7, 0)],
            vec![(2, 2), (5, 5)],
        )
        .unwrap();
        let tr = g.step(&[5, 0, 0, 0], &mut rng).unwrap();
        assert_eq!(tr.reward, c.step_penalty);
        let mut g = GridWorld::with_positions(
            c,
            vec![(1, 1), (3, 3), (0, 7), (7, 0)],
            vec![(2, 2), (5, 5)],
        )
        .unwrap();
        let tr = g.step(&[5, 5, 0, 0], &mut rng).unwrap();
        assert!((tr.reward - (c.capture_reward + c.step_penalty)).abs() < 1e-12);
        assert_ne!(g.prey_positions()[0], (2, 2));
        assert!(g.step(&[6, 0, 0, 0], &mut rng).is_err());
    }

    #[test]
    fn agents_cannot_enter_prey_or_leave_grid() {
        let mut rng = keyed_stream(Domain::Verification, 5, 0, 0);
        let mut g = GridWorld::with_positions(
            cfg(),
            vec![(0, 0), (2, 1), (5, 5), (6, 6)],
            vec![(3, 1), (0, 4)],
        )
        .unwrap();
        g.step(&[3, 4, 0, 0], &mut rng).unwrap();
        assert_eq!(g.agent_positions()[0], (0, 0));
        assert_eq!(g.agent_positions()[1], (2, 1));
    }

    #[test]
    fn feature_widths_match() {
        let g = GridWorld::new(cfg()).unwrap();
        let v = g.views();
        for size in [2, 4] {
            let grp = AgentSet::from_members(&(0..size).collect::<Vec<_>>());
            let mut out = Vec::new();
            g.group_features(&v[0], 0, grp, &mut out);
            assert_eq!(out.len(), g.group_dim(size));
        }
        let mut out = Vec::new();
        g.own_features(&v[2], 2, &mut out);
        assert_eq!(out.len(), g.own_dim());
        let mut out = Vec::new();
        g.state_features(&mut out);
        assert_eq!(out.len(), g.state_dim());
    }

    #[test]
    fn episode_ends_at_horizon() {
        let c = GridWorldConfig {
            horizon: 3,
            ..cfg()
        };
        let mut g = GridWorld::new(c).unwrap();
        let mut rng = keyed_stream(Domain::Verification, 6, 0, 0);
        g.reset(&mut rng);
        assert!(!g.step(&[0; 4], &mut rng).unwrap().done);
        assert!(!g.step(&[0; 4], &mut rng).unwrap().done);
        assert!(g.step(&[0; 4], &mut rng).unwrap().done);
    }
}
