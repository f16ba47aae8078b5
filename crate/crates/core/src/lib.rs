//! Hierarchical common-knowledge policies for cooperative multi-agent learning.
//!
//! Groups of agents that can all see each other share common knowledge about the
//! entities they jointly observe. A policy tree conditions each group controller on
//! that knowledge only, so every member can evaluate the controller on its own and
//! the whole tree can be sampled without communication, given a shared seed.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration loading and
//! the command line live in the companion `mackrl-harness` crate.
//!
//! Layout:
//!
//! - [`ck`]: visibility masks, mutual and common knowledge, per-agent beliefs.
//! - [`partition`]: pairwise partitions of an agent set.
//! - [`tree`]: the pairwise policy tree, decentralised sampling and the joint policy.
//! - [`sampling`]: correlated sampling between agents with differing beliefs.
//! - [`approx`]: policy and value heads, exploration and Adam.
//! - [`envs`]: the two-player matrix game and a field-of-view gridworld.
//! - [`oracle`]: exhaustive optimal values for the matrix game policy classes.
//! - [`trainer`]: centralised-critic actor-critic training and baselines.
#![no_std]
// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod approx;
pub mod ck;
pub mod envs;
mod error;
pub mod oracle;
pub mod partition;
pub mod rng;
pub mod sampling;
pub mod trainer;
pub mod tree;

pub use error::{Error, Result};
