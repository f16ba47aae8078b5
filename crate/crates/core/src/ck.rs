//! Mutual and common knowledge of agent groups over entity-based states.
//!
//! A state is a set of entities with feature vectors. An agent sees an entity when
//! its visibility mask, a predicate over the two feature vectors, holds. Because the
//! mask is commonly known, an agent that sees both `b` and `e` can tell whether `b`
//! sees `e`. Common knowledge of a group is then the mutual knowledge of the group
//! when all members see each other, and empty otherwise.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntityKind {
    Agent,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityState {
    pub id: EntityId,
    pub kind: EntityKind,
    pub features: Vec<f64>,
}

impl EntityState {
    pub fn new(id: u32, kind: EntityKind, features: Vec<f64>) -> Self {
        EntityState {
            id: EntityId(id),
            kind,
            features,
        }
    }
}

pub type EntitySet = BTreeSet<EntityId>;

/// A full state: every entity with its true features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    entities: Vec<EntityState>,
}

impl WorldState {
    /// Fails when ids repeat or feature lengths differ.
    pub fn new(entities: Vec<EntityState>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for e in &entities {
            if !ids.insert(e.id) {
                return Err(domain(format!("duplicate entity id {}", e.id.0)));
            }
        }
        if let Some(first) = entities.first() {
            let len = first.features.len();
            if entities.iter().any(|e| e.features.len() != len) {
                return Err(domain("entity feature lengths differ"));
            }
        }
        Ok(WorldState { entities })
    }

    pub fn entities(&self) -> &[EntityState] {
        &self.entities
    }

    pub fn entity(&self, id: EntityId) -> Option<&EntityState> {
        self.entities.iter().find(|e| e.id == id)
    }

    fn agent(&self, id: EntityId) -> Result<&EntityState> {
        match self.entity(id) {
            Some(e) if e.kind == EntityKind::Agent => Ok(e),
            Some(_) => Err(domain(format!("entity {} is not an agent", id.0))),
            None => Err(domain(format!("unknown agent {}", id.0))),
        }
    }
}

/// Predicate `mu(observer features, target features)`.
pub trait VisibilityMask {
    fn visible(&self, observer: &[f64], target: &[f64]) -> bool;
}

/// Sees everything within Euclidean distance `radius` of the observer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularFov {
    pub radius: f64,
    /// Feature indices holding the x and y coordinates.
    pub x: usize,
    pub y: usize,
}

impl CircularFov {
    pub fn new(radius: f64) -> Self {
        CircularFov { radius, x: 0, y: 1 }
    }
}

impl VisibilityMask for CircularFov {
    fn visible(&self, observer: &[f64], target: &[f64]) -> bool {
        let dx = observer[self.x] - target[self.x];
        let dy = observer[self.y] - target[self.y];
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// Explicit visibility table indexed by an integer feature.
///
/// Row `i`, column `j` says whether the entity whose index feature is `i` sees the
/// entity whose index feature is `j`. The diagonal is always visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMask {
    table: Vec<Vec<bool>>,
    index_feature: usize,
}

impl TabularMask {
    pub fn new(mut table: Vec<Vec<bool>>, index_feature: usize) -> Self {
        for (i, row) in table.iter_mut().enumerate() {
            if i < row.len() {
                row[i] = true;
            }
        }
        TabularMask {
            table,
            index_feature,
        }
    }
}

impl VisibilityMask for TabularMask {
    fn visible(&self, observer: &[f64], target: &[f64]) -> bool {
        let i = observer[self.index_feature] as usize;
        let j = target[self.index_feature] as usize;
        i == j
            || self
                .table
                .get(i)
                .and_then(|r| r.get(j))
                .copied()
                .unwrap_or(false)
    }
}

/// What one agent perceives: the features of every entity it can see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentObservation {
    pub owner: EntityId,
    pub entities: Vec<EntityState>,
}

impl AgentObservation {
    pub fn get(&self, id: EntityId) -> Option<&EntityState> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn ids(&self) -> EntitySet {
        self.entities.iter().map(|e| e.id).collect()
    }
}

/// Common knowledge `I^G` of a group together with the commonly observed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonKnowledgeSet {
    pub group: BTreeSet<EntityId>,
    pub entities: EntitySet,
    pub observation: Vec<EntityState>,
}

impl CommonKnowledgeSet {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

/// An agent's own estimate of what its group commonly knows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSet {
    pub owner: EntityId,
    pub group: BTreeSet<EntityId>,
    pub entities: EntitySet,
    pub observation: Vec<EntityState>,
}

impl BeliefSet {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

/// `M^a`: the entities agent `agent` sees, always including itself.
pub fn visible_set(
    state: &WorldState,
    agent: EntityId,
    mask: &impl VisibilityMask,
) -> Result<EntitySet> {
    let me = state.agent(agent)?;
    Ok(state
        .entities
        .iter()
        .filter(|e| e.id == agent || mask.visible(&me.features, &e.features))
        .map(|e| e.id)
        .collect())
}

/// `o(s, a)`: the features of the entities in `M^a`.
pub fn observe(
    state: &WorldState,
    agent: EntityId,
    mask: &impl VisibilityMask,
) -> Result<AgentObservation> {
    let seen = visible_set(state, agent, mask)?;
    Ok(AgentObservation {
        owner: agent,
        entities: state
            .entities
            .iter()
            .filter(|e| seen.contains(&e.id))
            .cloned()
            .collect(),
    })
}

fn check_group(state: &WorldState, group: &BTreeSet<EntityId>) -> Result<()> {
    if group.is_empty() {
        return Err(domain("group must not be empty"));
    }
    for &a in group {
        state.agent(a)?;
    }
    Ok(())
}

/// `M^G`: entities every member of the group sees.
pub fn mutual_knowledge(
    state: &WorldState,
    group: &BTreeSet<EntityId>,
    mask: &impl VisibilityMask,
) -> Result<EntitySet> {
    check_group(state, group)?;
    let mut members = group.iter();
    let mut acc = visible_set(state, *members.next().expect("nonempty"), mask)?;
    for &a in members {
        let seen = visible_set(state, a, mask)?;
        acc.retain(|e| seen.contains(e));
    }
    Ok(acc)
}

fn sees(state: &WorldState, a: EntityId, b: EntityId, mask: &impl VisibilityMask) -> bool {
    if a == b {
        return true;
    }
    match (state.entity(a), state.entity(b)) {
        (Some(x), Some(y)) => mask.visible(&x.features, &y.features),
        _ => false,
    }
}

/// Common knowledge via the closed form: `M^G` when every ordered pair of members
/// sees each other, empty otherwise.
pub fn common_knowledge_closed_form(
    state: &WorldState,
    group: &BTreeSet<EntityId>,
    mask: &impl VisibilityMask,
) -> Result<CommonKnowledgeSet> {
    let mutual = mutual_knowledge(state, group, mask)?;
    let all_see = group
        .iter()
        .all(|&a| group.iter().all(|&b| sees(state, a, b, mask)));
    let entities = if all_see { mutual } else { EntitySet::new() };
    let observation = state
        .entities
        .iter()
        .filter(|e| entities.contains(&e.id))
        .cloned()
        .collect();
    Ok(CommonKnowledgeSet {
        group: group.clone(),
        entities,
        observation,
    })
}

/// Iterates `I^a_m = ∩_{b∈G} { e ∈ I^b_{m-1} | mu^a(s^a, s^b) }` from
/// `I^a_0 = M^a` and returns `I^{start}_{iterations}`.
pub fn common_knowledge_recursive(
    state: &WorldState,
    group: &BTreeSet<EntityId>,
    mask: &impl VisibilityMask,
    start_agent: EntityId,
    iterations: usize,
) -> Result<EntitySet> {
    check_group(state, group)?;
    if !group.contains(&start_agent) {
        return Err(domain(format!(
            "agent {} is not in the group",
            start_agent.0
        )));
    }
    let members: Vec<EntityId> = group.iter().copied().collect();
    let mut level: Vec<EntitySet> = members
        .iter()
        .map(|&a| visible_set(state, a, mask))
        .collect::<Result<_>>()?;
    for _ in 0..iterations {
        let next = members
            .iter()
            .map(|&a| {
                let mut acc: Option<EntitySet> = None;
                for (b, prev) in members.iter().zip(&level) {
                    let part: EntitySet = if sees(state, a, *b, mask) {
                        prev.clone()
                    } else {
                        EntitySet::new()
                    };
                    acc = Some(match acc {
                        None => part,
                        Some(mut s) => {
                            s.retain(|e| part.contains(e));
                            s
                        }
                    });
                }
                acc.unwrap_or_default()
            })
            .collect();
        level = next;
    }
    let idx = members
        .iter()
        .position(|&a| a == start_agent)
        .expect("member");
    Ok(level.swap_remove(idx))
}

/// Common knowledge as the owner believes it from its own (possibly noisy)
/// observation, treating the observed features as true.
///
/// Every member must appear in the observation, every ordered pair of members must
/// see each other according to the observed features, and the result keeps the
/// observed entities that all members see. With a noiseless observation this equals
/// [`common_knowledge_closed_form`].
pub fn belief_common_knowledge(
    own: &AgentObservation,
    group: &BTreeSet<EntityId>,
    mask: &impl VisibilityMask,
) -> Result<BeliefSet> {
    if group.is_empty() {
        return Err(domain("group must not be empty"));
    }
    let empty = || BeliefSet {
        owner: own.owner,
        group: group.clone(),
        entities: EntitySet::new(),
        observation: Vec::new(),
    };
    let mut members = Vec::with_capacity(group.len());
    for &g in group {
        match own.get(g) {
            Some(e) => members.push(e),
            None => return Ok(empty()),
        }
    }
    let pair_ok = members.iter().all(|b| {
        members
            .iter()
            .all(|c| b.id == c.id || mask.visible(&b.features, &c.features))
    });
    if !pair_ok {
        return Ok(empty());
    }
    let observation: Vec<EntityState> = own
        .entities
        .iter()
        .filter(|e| {
            members
                .iter()
                .all(|b| b.id == e.id || mask.visible(&b.features, &e.features))
        })
        .cloned()
        .collect();
    Ok(BeliefSet {
        owner: own.owner,
        group: group.clone(),
        entities: observation.iter().map(|e| e.id).collect(),
        observation,
    })
}
