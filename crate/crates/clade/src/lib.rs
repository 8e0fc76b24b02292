//! Experiment harness for clade-level Bayesian tree search over priority
//! heuristics: configuration, datasets on disk, a chat-completions backend,
//! parallel timed evaluation, traces and comparisons.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod evaluator;
pub mod experiment;
pub mod llm;
pub mod trace;

pub use config::{ConfigError, RunConfig, Task};
pub use experiment::{execute, run_comparison, write_outputs, RunReport, Variant};
