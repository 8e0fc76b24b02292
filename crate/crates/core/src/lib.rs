//! Clade-level Bayesian tree search over priority-function heuristics.
//!
//! The crate is `no_std` (with `alloc`) and holds everything that does not
//! touch the file system, the network or the clock: Beta beliefs, the search
//! tree, selection policies, the heuristic DSL, benchmark problems, the
//! operator-based generator and the run engine.

#![no_std]
// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod belief;
pub mod dsl;
pub mod engine;
pub mod generator;
pub mod policy;
pub mod problems;
pub mod rng;
pub mod synthetic;
pub mod tree;

pub use belief::{BeliefError, BetaParams};
pub use engine::{run_search, run_search_with, BestHeuristic, Candidate, RunOutput, RunTrace, SearchConfig, TraceRow};
pub use policy::{PolicyConfig, SelectionMode, StabilizationMean};
pub use rng::{Rng, SeedSet};
pub use tree::{NodeId, Tree, TreeConfig};
