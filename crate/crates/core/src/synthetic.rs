//! A two-branch simulation where payoff is hidden below a weak first node.
//!
//! Branch A's first node pays `Bernoulli(0.2)` but every deeper node of A
//! pays `Bernoulli(0.9)`; every node of branch B pays `Bernoulli(0.6)`. Each
//! selection attaches one child under the chosen leaf, draws its outcome and
//! backpropagates it. A policy that judges nodes by their own outcomes keeps
//! refining B; one that credits clades discovers A's subtree.

use alloc::vec::Vec;

use crate::engine::{RunTrace, TraceRow};
use crate::policy::{self, PolicyConfig, PolicyError, SelectionMode, StabilizationMean};
use crate::rng::{Rng, SeedSet};
use crate::tree::{NodeId, Tree, TreeConfig, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DeepPayoffConfig {
    pub budget: u64,
    pub lambda_decay: f64,
    pub omega_cool: f64,
    pub n_pseudo: f64,
    pub uct_c: f64,
    pub mode: SelectionMode,
    pub stabilization: StabilizationMean,
    pub shallow_payoff: f64,
    pub deep_payoff: f64,
    pub other_payoff: f64,
    /// Window of final selections summarized by [`DeepPayoffRun::tail_share_a`].
    pub tail: usize,
}

impl Default for DeepPayoffConfig {
    fn default() -> Self {
        Self {
            budget: 500,
            lambda_decay: 0.8,
            omega_cool: 1.0,
            n_pseudo: 10.0,
            uct_c: 1.41,
            mode: SelectionMode::CladeThompson,
            stabilization: StabilizationMean::Clade,
            shallow_payoff: 0.2,
            deep_payoff: 0.9,
            other_payoff: 0.6,
            tail: 100,
        }
    }
}

impl DeepPayoffConfig {
    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig { lambda_decay: self.lambda_decay, ..TreeConfig::default() }
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            n_pseudo: self.n_pseudo,
            omega_cool: self.omega_cool,
            budget: self.budget,
            uct_c: self.uct_c,
            mode: self.mode,
            stabilization: self.stabilization,
        }
    }

    fn payoff(&self, branch: Branch, depth: u32) -> f64 {
        match (branch, depth) {
            (Branch::A, 1) => self.shallow_payoff,
            (Branch::A, _) => self.deep_payoff,
            (Branch::B, _) => self.other_payoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SyntheticError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone)]
pub struct DeepPayoffRun {
    /// Raw score is the latent payoff of the evaluated node; outcome is the draw.
    pub trace: RunTrace,
    /// Branch entered by each policy selection, in order.
    pub selections: Vec<Branch>,
    pub tree: Tree<Branch>,
    tail: usize,
}

impl DeepPayoffRun {
    /// Fraction of the last `tail` selections that entered branch A.
    pub fn tail_share_a(&self) -> f64 {
        let tail = &self.selections[self.selections.len().saturating_sub(self.tail)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|&&b| b == Branch::A).count() as f64 / tail.len() as f64
    }
}

/// Simulates one run. Outcome draws use `seeds.evaluation`, selection uses
/// `seeds.policy`.
pub fn run_deep_payoff(cfg: &DeepPayoffConfig, seeds: &SeedSet) -> Result<DeepPayoffRun, SyntheticError> {
    let pcfg = cfg.policy_config();
    pcfg.validate()?;
    let mut tree: Tree<Branch> = Tree::new(cfg.tree_config())?;
    let mut policy_rng = Rng::seed_from_u64(seeds.policy);
    let mut outcome_rng = Rng::seed_from_u64(seeds.evaluation);
    let mut trace = RunTrace::default();
    let mut selections = Vec::new();
    let mut best: Option<f64> = None;

    let mut evaluate = |tree: &mut Tree<Branch>, parent: NodeId, branch: Branch, evals: u64| {
        let node = tree.add_child(parent, branch)?;
        let depth = tree.node(node)?.depth;
        let p = cfg.payoff(branch, depth);
        let outcome = f64::from(u8::from(outcome_rng.bernoulli(p)));
        tree.record_outcome(node, outcome)?;
        tree.note_raw_score(node, p)?;
        let evals = evals + 1;
        if evals.is_multiple_of(tree.config().freeze_check_interval) {
            if let Some(r) = tree.global_best_mean() {
                tree.freeze_sweep(r);
            }
        }
        best = Some(best.map_or(p, |b: f64| b.max(p)));
        let temperature = match pcfg.mode {
            SelectionMode::Uct => 1.0,
            _ => policy::annealing_temperature(evals - 1, &pcfg).map_err(PolicyError::from)?,
        };
        Ok::<_, SyntheticError>(TraceRow {
            eval_index: evals,
            node_id: node,
            parent_id: parent,
            action: None,
            raw_score: Some(p),
            outcome,
            global_best_raw: best,
            frozen_count: tree.frozen_count(),
            temperature,
        })
    };

    for branch in [Branch::A, Branch::B] {
        if (trace.rows.len() as u64) < cfg.budget {
            let row = evaluate(&mut tree, NodeId::ROOT, branch, trace.rows.len() as u64)?;
            trace.rows.push(row);
        }
    }
    while (trace.rows.len() as u64) < cfg.budget {
        let evals = trace.rows.len() as u64;
        let sel = match policy::select(&tree, &pcfg, evals, &mut policy_rng) {
            Ok(s) => s,
            Err(PolicyError::SearchExhausted) => break,
            Err(e) => return Err(e.into()),
        };
        let branch = *tree.node(sel.path[1])?.heuristic.as_ref().expect("simulated nodes carry a branch");
        selections.push(branch);
        let row = evaluate(&mut tree, sel.chosen, branch, evals)?;
        trace.rows.push(row);
    }
    Ok(DeepPayoffRun { trace, selections, tree, tail: cfg.tail })
}
