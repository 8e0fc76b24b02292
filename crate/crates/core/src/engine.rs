//! The search loop: initialization, then select, expand, evaluate,
//! backpropagate and freeze until the evaluation budget is spent.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dsl::{ActionKind, Expr, ProblemKind};
use crate::generator::{GenerationContext, Generator, PoolEntry};
use crate::policy::{self, PolicyConfig, PolicyError, SelectionMode};
use crate::problems::{EvalResult, Evaluator, Normalizer, OutcomeMode};
use crate::rng::{Rng, SeedSet};
use crate::tree::{NodeId, Tree, TreeConfig, TreeError};

/// Relative frequency of each expansion action. Zero disables an action.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ActionWeights {
    pub i1: f64,
    pub e1: f64,
    pub e2: f64,
    pub m1: f64,
    pub m2: f64,
    pub s1: f64,
}

impl Default for ActionWeights {
    fn default() -> Self {
        Self { i1: 0.0, e1: 1.0, e2: 1.0, m1: 1.0, m2: 1.0, s1: 1.0 }
    }
}

impl ActionWeights {
    pub fn get(&self, a: ActionKind) -> f64 {
        match a {
            ActionKind::I1 => self.i1,
            ActionKind::E1 => self.e1,
            ActionKind::E2 => self.e2,
            ActionKind::M1 => self.m1,
            ActionKind::M2 => self.m2,
            ActionKind::S1 => self.s1,
        }
    }
}

/// Reference value for the freezing threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FreezeReference {
    /// Highest clade mean among unfrozen nodes.
    #[default]
    CladeMean,
    /// Normalized outcome of the best raw score so far.
    BestRaw,
}

/// Parent set offered to the s1 action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum S1Parents {
    /// The top-K pool.
    #[default]
    Pool,
    /// Heuristics on the selection path; the pool when fewer than two.
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SearchConfig {
    pub tree: TreeConfig,
    pub policy: PolicyConfig,
    /// Random heuristics attached to the root before the search starts.
    pub n_init: u64,
    /// Size of the parent pool offered to crossover actions.
    pub pool_size: usize,
    pub actions: ActionWeights,
    pub outcome_mode: OutcomeMode,
    pub freeze_reference: FreezeReference,
    pub s1_parents: S1Parents,
    /// Expansions generated and evaluated per batch. Values above 1 select
    /// several targets before any of their outcomes is known.
    pub parallel_width: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tree: TreeConfig::default(),
            policy: PolicyConfig::default(),
            n_init: 4,
            pool_size: 10,
            actions: ActionWeights::default(),
            outcome_mode: OutcomeMode::Fractional,
            freeze_reference: FreezeReference::CladeMean,
            s1_parents: S1Parents::Pool,
            parallel_width: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.tree.validate()?;
        self.policy.validate()?;
        if self.n_init == 0 {
            return Err(EngineError::InvalidConfig("n_init must be >= 1"));
        }
        if self.policy.budget < self.n_init {
            return Err(EngineError::InvalidConfig("budget must be >= n_init"));
        }
        if self.pool_size == 0 {
            return Err(EngineError::InvalidConfig("pool_size must be >= 1"));
        }
        if self.parallel_width == 0 {
            return Err(EngineError::InvalidConfig("parallel_width must be >= 1"));
        }
        if ActionKind::ALL.iter().any(|&a| !(self.actions.get(a) >= 0.0) || !self.actions.get(a).is_finite()) {
            return Err(EngineError::InvalidConfig("action weights must be finite and >= 0"));
        }
        Ok(())
    }
}

/// The heuristic stored at a tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub expr: Expr,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based evaluation counter.
    pub eval_index: u64,
    pub node_id: NodeId,
    pub parent_id: NodeId,
    /// `None` outside heuristic search (synthetic runs).
    pub action: Option<ActionKind>,
    /// `None` when generation failed.
    pub raw_score: Option<f64>,
    pub outcome: f64,
    pub global_best_raw: Option<f64>,
    pub frozen_count: usize,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceViolation {
    #[error("row {0}: eval_index not strictly increasing")]
    EvalIndex(usize),
    #[error("row {0}: global_best_raw decreased")]
    GlobalBest(usize),
    #[error("row {0}: frozen_count decreased")]
    FrozenCount(usize),
    #[error("row {0}: temperature decreased")]
    Temperature(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    /// Checks the monotonicity invariants every trace must satisfy.
    pub fn check_invariants(&self) -> Result<(), TraceViolation> {
        for (i, w) in self.rows.windows(2).enumerate() {
            let (a, b) = (&w[0], &w[1]);
            let row = i + 1;
            if b.eval_index <= a.eval_index {
                return Err(TraceViolation::EvalIndex(row));
            }
            match (a.global_best_raw, b.global_best_raw) {
                (Some(_), None) => return Err(TraceViolation::GlobalBest(row)),
                (Some(x), Some(y)) if y < x => return Err(TraceViolation::GlobalBest(row)),
                _ => {}
            }
            if b.frozen_count < a.frozen_count {
                return Err(TraceViolation::FrozenCount(row));
            }
            if b.temperature < a.temperature {
                return Err(TraceViolation::Temperature(row));
            }
        }
        Ok(())
    }

    pub fn final_best(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.global_best_raw)
    }

    pub fn max_raw(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.raw_score).reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestHeuristic {
    pub expr: Expr,
    pub description: String,
    pub raw_score: f64,
    pub found_at_eval: u64,
    pub node: NodeId,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// `None` only if every evaluation failed.
    pub best: Option<BestHeuristic>,
    pub trace: RunTrace,
    pub tree: Tree<Candidate>,
    /// True when the search stopped because every root clade was frozen.
    pub exhausted: bool,
}

impl RunOutput {
    pub fn evaluations(&self) -> u64 {
        self.trace.rows.len() as u64
    }
}

struct Pending {
    node: NodeId,
    parent: NodeId,
    action: ActionKind,
    candidate: Option<Candidate>,
    temperature: f64,
}

struct Engine<'a, G: ?Sized> {
    cfg: &'a SearchConfig,
    kind: ProblemKind,
    generator: &'a mut G,
    tree: Tree<Candidate>,
    raw_by_node: Vec<Option<f64>>,
    normalizer: Normalizer,
    pool: Vec<PoolEntry>,
    best: Option<BestHeuristic>,
    trace: RunTrace,
    evals: u64,
    policy_rng: Rng,
    gen_rng: Rng,
}

impl<'a, G: Generator + ?Sized> Engine<'a, G> {
    fn temperature(&self) -> f64 {
        match self.cfg.policy.mode {
            SelectionMode::Uct => 1.0,
            _ => policy::annealing_temperature(self.evals, &self.cfg.policy).expect("validated config"),
        }
    }

    fn entry_of(&self, id: NodeId) -> Option<PoolEntry> {
        let c = self.tree.node(id).ok()?.heuristic.as_ref()?;
        Some(PoolEntry {
            expr: c.expr.clone(),
            description: c.description.clone(),
            raw_score: self.raw_by_node.get(id.0).copied().flatten().unwrap_or(f64::NAN),
        })
    }

    fn path_parents(&self, path: &[NodeId]) -> Vec<PoolEntry> {
        let mut out: Vec<PoolEntry> = path.iter().filter_map(|&id| self.entry_of(id)).collect();
        // Stable: equal scores keep root-to-leaf order.
        out.sort_by(|a, b| b.raw_score.total_cmp(&a.raw_score));
        out
    }

    fn choose_action(&mut self, target_known: bool, pool_len: usize, s1_len: usize) -> ActionKind {
        let applicable: Vec<(ActionKind, f64)> = ActionKind::ALL
            .iter()
            .map(|&a| (a, self.cfg.actions.get(a)))
            .filter(|&(a, w)| {
                w > 0.0
                    && (!a.needs_pool() || if a == ActionKind::S1 { s1_len } else { pool_len } >= 2)
                    && (target_known || !matches!(a, ActionKind::M1 | ActionKind::M2 | ActionKind::E2))
            })
            .collect();
        let total: f64 = applicable.iter().map(|(_, w)| w).sum();
        if applicable.is_empty() {
            return ActionKind::M1;
        }
        let mut u = self.policy_rng.uniform() * total;
        for &(a, w) in &applicable {
            if u < w {
                return a;
            }
            u -= w;
        }
        applicable.last().expect("nonempty").0
    }

    fn expand(&mut self, parent: NodeId, ctx: GenerationContext, temperature: f64) -> Result<Pending, EngineError> {
        let action = ctx.action;
        let generated = self.generator.generate(&ctx, &mut self.gen_rng);
        let candidate = generated
            .ok()
            .filter(|h| h.expr.within_limits())
            .map(|h| Candidate { expr: h.expr, description: h.description });
        let node = match &candidate {
            Some(c) => self.tree.add_child(parent, c.clone())?,
            None => self.tree.add_failed_child(parent)?,
        };
        self.raw_by_node.resize(self.tree.len(), None);
        Ok(Pending { node, parent, action, candidate, temperature })
    }

    fn apply(&mut self, p: Pending, result: Option<EvalResult>) -> Result<TraceRow, EngineError> {
        self.evals += 1;
        let raw = result.map(|r| r.raw_score).filter(|r| r.is_finite());
        let outcome = match (raw, &p.candidate) {
            (Some(raw), Some(c)) => {
                self.raw_by_node[p.node.0] = Some(raw);
                self.tree.note_raw_score(p.node, raw)?;
                if self.best.as_ref().is_none_or(|b| raw > b.raw_score) {
                    self.best = Some(BestHeuristic {
                        expr: c.expr.clone(),
                        description: c.description.clone(),
                        raw_score: raw,
                        found_at_eval: self.evals,
                        node: p.node,
                    });
                }
                let entry = PoolEntry { expr: c.expr.clone(), description: c.description.clone(), raw_score: raw };
                let at = self.pool.partition_point(|e| e.raw_score >= raw);
                if at < self.cfg.pool_size {
                    self.pool.insert(at, entry);
                    self.pool.truncate(self.cfg.pool_size);
                }
                let outcome = self.normalizer.normalize(raw);
                self.tree.record_outcome(p.node, outcome)?;
                outcome
            }
            _ => {
                self.tree.record_outcome(p.node, 0.0)?;
                self.tree.freeze_clade(p.node)?;
                0.0
            }
        };
        if self.evals.is_multiple_of(self.cfg.tree.freeze_check_interval) {
            let reference = match self.cfg.freeze_reference {
                FreezeReference::CladeMean => self.tree.global_best_mean(),
                FreezeReference::BestRaw => self.best.as_ref().map(|b| self.normalizer.grade(b.raw_score)),
            };
            if let Some(r) = reference {
                self.tree.freeze_sweep(r);
            }
        }
        Ok(TraceRow {
            eval_index: self.evals,
            node_id: p.node,
            parent_id: p.parent,
            action: Some(p.action),
            raw_score: raw,
            outcome,
            global_best_raw: self.best.as_ref().map(|b| b.raw_score),
            frozen_count: self.tree.frozen_count(),
            temperature: p.temperature,
        })
    }

    fn settle<E: Evaluator + ?Sized>(
        &mut self,
        pending: Vec<Pending>,
        evaluator: &E,
        on_row: &mut dyn FnMut(&TraceRow),
    ) -> Result<(), EngineError> {
        let exprs: Vec<&Expr> = pending.iter().filter_map(|p| p.candidate.as_ref().map(|c| &c.expr)).collect();
        let mut results = evaluator.evaluate_batch(&exprs).into_iter();
        for p in pending {
            let r = if p.candidate.is_some() { results.next() } else { None };
            let row = self.apply(p, r)?;
            on_row(&row);
            self.trace.rows.push(row);
        }
        Ok(())
    }
}

/// Runs one search with streams derived from `seeds`.
pub fn run_search<E, G>(
    cfg: &SearchConfig,
    evaluator: &E,
    generator: &mut G,
    seeds: &SeedSet,
) -> Result<RunOutput, EngineError>
where
    E: Evaluator + ?Sized,
    G: Generator + ?Sized,
{
    run_search_with(cfg, evaluator, generator, seeds, &mut |_| {})
}

/// [`run_search`] with a callback invoked for every trace row as it is produced.
pub fn run_search_with<E, G>(
    cfg: &SearchConfig,
    evaluator: &E,
    generator: &mut G,
    seeds: &SeedSet,
    on_row: &mut dyn FnMut(&TraceRow),
) -> Result<RunOutput, EngineError>
where
    E: Evaluator + ?Sized,
    G: Generator + ?Sized,
{
    cfg.validate()?;
    let budget = cfg.policy.budget;
    let mut eng = Engine {
        cfg,
        kind: evaluator.kind(),
        generator,
        tree: Tree::new(cfg.tree)?,
        raw_by_node: vec![None],
        normalizer: Normalizer::new(cfg.outcome_mode),
        pool: Vec::new(),
        best: None,
        trace: RunTrace::default(),
        evals: 0,
        policy_rng: Rng::seed_from_u64(seeds.policy),
        gen_rng: Rng::seed_from_u64(seeds.generator),
    };

    // Initialization under the same batching as the main loop.
    let mut init_left = cfg.n_init.min(budget);
    while init_left > 0 {
        let width = init_left.min(cfg.parallel_width as u64);
        let mut pending = Vec::new();
        for _ in 0..width {
            let ctx = GenerationContext {
                action: ActionKind::I1,
                kind: eng.kind,
                target: None,
                parent_pool: eng.pool.clone(),
            };
            let t = eng.temperature();
            pending.push(eng.expand(NodeId::ROOT, ctx, t)?);
        }
        init_left -= width;
        eng.settle(pending, evaluator, on_row)?;
    }

    let mut exhausted = false;
    while eng.evals < budget && !exhausted {
        let width = (budget - eng.evals).min(cfg.parallel_width as u64);
        let mut pending = Vec::new();
        for _ in 0..width {
            let sel = match policy::select(&eng.tree, &cfg.policy, eng.evals, &mut eng.policy_rng) {
                Ok(s) => s,
                Err(PolicyError::SearchExhausted) => {
                    exhausted = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            let target = eng.entry_of(sel.chosen);
            let s1_pool = match cfg.s1_parents {
                S1Parents::Path => Some(eng.path_parents(&sel.path)).filter(|p| p.len() >= 2),
                S1Parents::Pool => None,
            };
            let s1_len = s1_pool.as_ref().map_or(eng.pool.len(), Vec::len);
            let action = eng.choose_action(target.is_some(), eng.pool.len(), s1_len);
            let parent_pool = match (action, s1_pool) {
                (ActionKind::S1, Some(p)) => p,
                _ => eng.pool.clone(),
            };
            let ctx = GenerationContext { action, kind: eng.kind, target, parent_pool };
            let t = eng.temperature();
            pending.push(eng.expand(sel.chosen, ctx, t)?);
        }
        eng.settle(pending, evaluator, on_row)?;
    }

    Ok(RunOutput { best: eng.best, trace: eng.trace, tree: eng.tree, exhausted })
}
