//! Agent sets and pairwise partitions.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::{keyed_stream, Domain};

/// A set of agent indices, stored as a bit mask (at most 64 agents).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct AgentSet(pub u64);

impl AgentSet {
    pub fn singleton(a: usize) -> Self {
        AgentSet(1 << a)
    }

    pub fn all(n: usize) -> Self {
        if n >= 64 {
            AgentSet(u64::MAX)
        } else {
            AgentSet((1u64 << n) - 1)
        }
    }

    pub fn from_members(members: &[usize]) -> Self {
        AgentSet(members.iter().fold(0, |m, &a| m | (1 << a)))
    }

    pub fn contains(self, a: usize) -> bool {
        a < 64 && self.0 & (1 << a) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        core::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let a = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(a)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.members().collect()
    }

    pub fn is_disjoint(self, other: AgentSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: AgentSet) -> AgentSet {
        AgentSet(self.0 | other.0)
    }
}

impl fmt::Debug for AgentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

/// Disjoint groups covering a parent group, ordered by their lowest member.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Partition {
    groups: Vec<AgentSet>,
}

impl Partition {
    pub fn new(mut groups: Vec<AgentSet>) -> Result<Self> {
        if groups.iter().any(|g| g.is_empty()) {
            return Err(domain("partition groups must be nonempty"));
        }
        for (i, g) in groups.iter().enumerate() {
            if groups[i + 1..].iter().any(|h| !g.is_disjoint(*h)) {
                return Err(domain("partition groups overlap"));
            }
        }
        groups.sort_by_key(|g| g.first());
        Ok(Partition { groups })
    }

    /// Every agent on its own: the delegation action of a group.
    pub fn singletons(group: AgentSet) -> Self {
        Partition {
            groups: group.members().map(AgentSet::singleton).collect(),
        }
    }

    pub fn groups(&self) -> &[AgentSet] {
        &self.groups
    }

    pub fn covered(&self) -> AgentSet {
        self.groups
            .iter()
            .fold(AgentSet::default(), |acc, g| acc.union(*g))
    }

    pub fn group_of(&self, agent: usize) -> Option<AgentSet> {
        self.groups.iter().copied().find(|g| g.contains(agent))
    }

    /// Pairs plus at most one singleton.
    pub fn is_pairwise(&self) -> bool {
        self.groups.iter().all(|g| g.len() <= 2)
            && self.groups.iter().filter(|g| g.len() == 1).count() <= 1
    }

    fn sort_key(&self) -> Vec<Vec<usize>> {
        self.groups.iter().map(|g| g.to_vec()).collect()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, g) in self.groups.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (j, a) in g.members().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", a)?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

/// `n! / (2^floor(n/2) floor(n/2)!)`.
pub fn pair_partition_count(n: usize) -> u128 {
    let half = n / 2;
    let num: u128 = (1..=n as u128).product();
    let den: u128 = (1u128 << half) * (1..=half as u128).product::<u128>();
    num / den
}

/// All partitions of `{0, .., n-1}` into pairs, with one singleton when `n` is odd,
/// in lexicographic order of their sorted groups.
pub fn enumerate_pair_partitions(n: usize) -> Result<Vec<Partition>> {
    if n < 2 {
        return Err(domain(format!("need at least two agents, got {n}")));
    }
    if n > 64 {
        return Err(domain("at most 64 agents"));
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n / 2 + 1);
    extend(AgentSet::all(n), n % 2 == 1, &mut current, &mut out);
    out.sort_by_cached_key(|p| p.sort_key());
    Ok(out)
}

fn extend(
    rest: AgentSet,
    singleton_left: bool,
    current: &mut Vec<AgentSet>,
    out: &mut Vec<Partition>,
) {
    let Some(a) = rest.first() else {
        out.push(Partition {
            groups: current.clone(),
        });
        return;
    };
    let others = AgentSet(rest.0 & !(1 << a));
    if singleton_left {
        current.push(AgentSet::singleton(a));
        extend(others, false, current, out);
        current.pop();
    }
    for b in others.members() {
        current.push(AgentSet::from_members(&[a, b]));
        extend(AgentSet(others.0 & !(1 << b)), singleton_left, current, out);
        current.pop();
    }
}

/// A uniform sample of `k` partitions without replacement, in canonical order.
pub fn subsample_partitions(all: &[Partition], k: usize, seed: u64) -> Result<Vec<Partition>> {
    if k == 0 || k > all.len() {
        return Err(domain(format!(
            "subsample size {k} outside 1..={}",
            all.len()
        )));
    }
    let mut rng = keyed_stream(Domain::Subsample, seed, all.len() as u64, k as u64);
    let mut idx = rand::seq::index::sample(&mut rng, all.len(), k).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| all[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn small_counts() {
        assert_eq!(enumerate_pair_partitions(2).unwrap().len(), 1);
        let three = enumerate_pair_partitions(3).unwrap();
        let shown: Vec<_> = three.iter().map(|p| p.to_string()).collect();
        assert_eq!(shown, vec!["{{0},{1,2}}", "{{0,1},{2}}", "{{0,2},{1}}"]);
        assert!(enumerate_pair_partitions(1).is_err());
    }

    #[test]
    fn formula_matches_enumeration() {
        for n in 2..=8 {
            let parts = enumerate_pair_partitions(n).unwrap();
            assert_eq!(parts.len() as u128, pair_partition_count(n), "n={n}");
            for p in &parts {
                assert!(p.is_pairwise());
                assert_eq!(p.covered(), AgentSet::all(n));
            }
        }
        assert_eq!(pair_partition_count(11), 10395);
    }

    #[test]
    fn subsample_contract() {
        let all = enumerate_pair_partitions(8).unwrap();
        assert_eq!(subsample_partitions(&all, all.len(), 3).unwrap(), all);
        let a = subsample_partitions(&all, 5, 11).unwrap();
        assert_eq!(a, subsample_partitions(&all, 5, 11).unwrap());
        assert_eq!(a.len(), 5);
        for (i, p) in a.iter().enumerate() {
            assert!(!a[i + 1..].contains(p));
        }
        assert!(subsample_partitions(&all, 0, 1).is_err());
        assert!(subsample_partitions(&all, all.len() + 1, 1).is_err());
    }

    #[test]
    fn overlapping_partition_rejected() {
        let g = AgentSet::from_members(&[0, 1]);
        assert!(Partition::new(vec![g, AgentSet::singleton(1)]).is_err());
    }
}
