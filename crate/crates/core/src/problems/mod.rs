//! Benchmark problems: instance generation, feature extraction and
//! evaluation of priority expressions.
//!
//! Raw scores are oriented so that larger is better: minimization objectives
//! (tour length, bin gap) are negated.

pub mod aco;
pub mod bpp;
pub mod kp;
pub mod normalize;
pub mod tsp;

use alloc::vec::Vec;

pub use aco::{aco_solve_tsp, eval_aco_tsp, AcoConfig};
pub use bpp::{eval_bpp_online, gen_bpp_mixture, gen_bpp_weibull, BppInstance};
pub use kp::{eval_kp_constructive, gen_kp, KpInstance};
pub use normalize::{Normalizer, OutcomeMode};
pub use tsp::{eval_tsp_constructive, gen_tsp, nearest_neighbor_tour, tour_length, tsp_features, TspInstance};

use crate::dsl::{Expr, ProblemKind};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Larger is better.
    pub raw_score: f64,
    /// Objective per instance in its natural orientation.
    pub per_instance: Vec<f64>,
    /// Seconds spent; zero unless filled in by a timing wrapper.
    pub wall_time: f64,
}

/// Scores a heuristic on a fixed dataset.
pub trait Evaluator {
    fn kind(&self) -> ProblemKind;

    fn evaluate(&self, expr: &Expr) -> EvalResult;

    /// Evaluates several heuristics; results are in input order.
    fn evaluate_batch(&self, exprs: &[&Expr]) -> Vec<EvalResult> {
        exprs.iter().map(|e| self.evaluate(e)).collect()
    }
}

/// Hand-written reference heuristic per problem.
pub fn baseline_text(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Tsp => "neg(dist_to_cand)",
        ProblemKind::Kp => "div_p(value, weight)",
        ProblemKind::Bpp => "neg(sub(bin_residual, item_size))",
        ProblemKind::AcoTsp => "div_p(1, d_ij)",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Tsp(Vec<TspInstance>),
    Kp(Vec<KpInstance>),
    Bpp(Vec<BppInstance>),
    AcoTsp {
        instances: Vec<TspInstance>,
        config: AcoConfig,
        /// Base of the per-instance colony streams.
        seed: u64,
    },
}

impl Dataset {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Dataset::Tsp(_) => ProblemKind::Tsp,
            Dataset::Kp(_) => ProblemKind::Kp,
            Dataset::Bpp(_) => ProblemKind::Bpp,
            Dataset::AcoTsp { .. } => ProblemKind::AcoTsp,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Tsp(v) | Dataset::AcoTsp { instances: v, .. } => v.len(),
            Dataset::Kp(v) => v.len(),
            Dataset::Bpp(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reference objective per instance, when the dataset carries one.
    pub fn references(&self) -> Vec<Option<f64>> {
        match self {
            Dataset::Tsp(v) | Dataset::AcoTsp { instances: v, .. } => v.iter().map(|i| i.reference).collect(),
            Dataset::Kp(v) => v.iter().map(|i| i.reference).collect(),
            Dataset::Bpp(v) => v.iter().map(|_| Some(0.0)).collect(),
        }
    }

    /// Per-instance objectives. `abort` only affects the ACO evaluator.
    pub fn objectives(&self, expr: &Expr, abort: &mut dyn FnMut() -> bool) -> Vec<f64> {
        match self {
            Dataset::Tsp(v) => eval_tsp_constructive(expr, v),
            Dataset::Kp(v) => eval_kp_constructive(expr, v),
            Dataset::Bpp(v) => eval_bpp_online(expr, v),
            Dataset::AcoTsp { instances, config, seed } => eval_aco_tsp(expr, instances, config, *seed, abort),
        }
    }

    /// Mean objective, negated for minimization problems.
    pub fn raw_score(&self, per_instance: &[f64]) -> f64 {
        let mean = per_instance.iter().sum::<f64>() / per_instance.len().max(1) as f64;
        if self.kind().minimizes() { -mean } else { mean }
    }

    pub fn evaluate_with_abort(&self, expr: &Expr, abort: &mut dyn FnMut() -> bool) -> EvalResult {
        let per_instance = self.objectives(expr, abort);
        EvalResult { raw_score: self.raw_score(&per_instance), per_instance, wall_time: 0.0 }
    }
}

impl Evaluator for Dataset {
    fn kind(&self) -> ProblemKind {
        Dataset::kind(self)
    }

    fn evaluate(&self, expr: &Expr) -> EvalResult {
        self.evaluate_with_abort(expr, &mut || false)
    }
}
