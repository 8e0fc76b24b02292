//! The expansion boundary: producing a new heuristic for a selected node.
//!
//! Two backends satisfy [`Generator`]: [`MockGenerator`] applies the DSL
//! genetic operators directly, and the HTTP adapter in the `clade` crate
//! renders [`build_prompt`] for a chat model and reads its reply back with
//! [`extract_heuristic`]. [`ScriptedGenerator`] replays a fixed sequence and
//! exists for contract tests.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::dsl::{
    blend, crossover, mutate_parametric, mutate_structural, parse, random_expr, ActionKind,
    BlendVariant, Expr, FeatureSchema, ParseErrorKind, ProblemKind,
};
use crate::rng::Rng;

/// Depth bound for initial random heuristics.
pub const INIT_DEPTH: usize = 4;

/// One evaluated heuristic offered as context to the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub expr: Expr,
    pub description: String,
    pub raw_score: f64,
}

#[derive(Debug, Clone)]
pub struct GenerationContext {
    pub action: ActionKind,
    pub kind: ProblemKind,
    /// The selected node's heuristic; absent for initialization.
    pub target: Option<PoolEntry>,
    /// Parents for crossover actions, best raw score first.
    pub parent_pool: Vec<PoolEntry>,
}

impl GenerationContext {
    pub fn schema(&self) -> &'static FeatureSchema {
        self.kind.schema()
    }

    pub fn task_description(&self) -> &'static str {
        task_description(self.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Mock,
    Llm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedHeuristic {
    pub expr: Expr,
    pub description: String,
    pub source: Source,
    pub raw_reply: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("reply is empty")]
    Empty,
    #[error("reply contains no parseable expression")]
    NoExpression,
    #[error("expression uses unknown feature `{0}`")]
    SchemaViolation(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerationError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("no usable heuristic after {attempts} attempt(s): {last}")]
    Unusable { attempts: u32, last: ExtractError },
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

pub trait Generator {
    fn generate(&mut self, ctx: &GenerationContext, rng: &mut Rng) -> Result<GeneratedHeuristic, GenerationError>;
}

/// Operator-based backend; a pure function of context and rng state.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockGenerator;

impl Generator for MockGenerator {
    fn generate(&mut self, ctx: &GenerationContext, rng: &mut Rng) -> Result<GeneratedHeuristic, GenerationError> {
        let expr = mock_dispatch(ctx, rng);
        Ok(GeneratedHeuristic {
            expr,
            description: mock_description(ctx.action).to_string(),
            source: Source::Mock,
            raw_reply: None,
        })
    }
}

fn mock_description(action: ActionKind) -> &'static str {
    match action {
        ActionKind::I1 => "random initial priority",
        ActionKind::E1 => "structurally novel priority",
        ActionKind::E2 => "transplant from a stronger heuristic",
        ActionKind::M1 => "structural mutation",
        ActionKind::M2 => "re-tuned constants",
        ActionKind::S1 => "weighted blend of two parents",
    }
}

/// Applies the operator bound to `ctx.action`.
///
/// Actions whose inputs are missing (no target, or fewer than two parents for
/// crossover) fall back to a fresh random expression.
pub fn mock_dispatch(ctx: &GenerationContext, rng: &mut Rng) -> Expr {
    let schema = ctx.schema();
    let pool: Vec<Expr> = ctx.parent_pool.iter().map(|p| p.expr.clone()).collect();
    let target = ctx.target.as_ref().map(|t| &t.expr);
    match (ctx.action, target) {
        (ActionKind::M1, Some(t)) => mutate_structural(t, schema, rng),
        (ActionKind::M2, Some(t)) => mutate_parametric(t, rng),
        (ActionKind::E2, Some(t)) if pool.len() >= 2 => {
            let donor = pool.iter().find(|p| *p != t).unwrap_or(&pool[0]);
            crossover(t, donor, rng)
        }
        (ActionKind::E1, _) if pool.len() >= 2 => blend(&pool, BlendVariant::Novel, schema, rng),
        (ActionKind::S1, _) if pool.len() >= 2 => blend(&pool, BlendVariant::WeightedSum, schema, rng),
        _ => random_expr(schema, rng, INIT_DEPTH),
    }
}

/// Replays a fixed list of replies, then reports exhaustion.
#[derive(Debug, Clone, Default)]
pub struct ScriptedGenerator {
    script: VecDeque<Result<GeneratedHeuristic, GenerationError>>,
}

impl ScriptedGenerator {
    pub fn new(script: impl IntoIterator<Item = Result<GeneratedHeuristic, GenerationError>>) -> Self {
        Self { script: script.into_iter().collect() }
    }
}

impl Generator for ScriptedGenerator {
    fn generate(&mut self, _ctx: &GenerationContext, _rng: &mut Rng) -> Result<GeneratedHeuristic, GenerationError> {
        self.script
            .pop_front()
            .unwrap_or_else(|| Err(GenerationError::Unavailable("script exhausted".into())))
    }
}

pub fn task_description(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Tsp => "Solving Traveling Salesman Problem (TSP) with constructive heuristics. TSP requires finding the shortest path that visits all given nodes and returns to the starting node.",
        ProblemKind::Kp => "Solving Knapsack Problem (KP) with constructive heuristics. KP requires selecting a subset of items with maximum total value whose total weight does not exceed the knapsack capacity.",
        ProblemKind::Bpp => "Solving online Bin Packing Problem (BPP). Items arrive one at a time and each must be placed at once into an open bin or a new bin, using as few bins as possible.",
        ProblemKind::AcoTsp => "Solving Traveling Salesman Problem (TSP) via stochastic solution sampling following \"heuristics\". TSP requires finding the shortest path that visits all given nodes and returns to the starting node.",
    }
}

fn signature(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Tsp => "'select_next_node'.\nThis function should accept 4 input(s): 'current_node', 'destination_node', 'unvisited_nodes', 'distance_matrix'.\nThe function should return 1 output(s): 'next_node'. The select next node function takes as input the current node, the destination node, a set of unvisited nodes, and a distance matrix, and returns the next node to visit.",
        ProblemKind::Kp => "'select_next_item'.\nThis function should accept 3 input(s): 'remaining_capacity', 'weights', 'values'.\nThe function should return 1 output(s): 'next_item'. The select next item function takes as input the remaining capacity and the weights and values of the unpacked items, and returns the next item to pack.",
        ProblemKind::Bpp => "'score'.\nThis function should accept 2 input(s): 'item', 'bins'.\nThe function should return 1 output(s): 'scores'. The score function takes as input the size of the arriving item and the remaining capacities of the feasible bins, and returns a priority score for each bin.",
        ProblemKind::AcoTsp => "'heuristics'.\nThis function should accept 1 input(s): 'distance_matrix'.\nThe function should return 1 output(s): 'heuristics_matrix'. The heuristics function takes as input a distance matrix and returns prior indicators of how promising it is to include each edge in a solution.",
    }
}

fn template(action: ActionKind) -> &'static str {
    match action {
        ActionKind::I1 => include_str!("../templates/i1.txt"),
        ActionKind::E1 => include_str!("../templates/e1.txt"),
        ActionKind::E2 => include_str!("../templates/e2.txt"),
        ActionKind::M1 => include_str!("../templates/m1.txt"),
        ActionKind::M2 => include_str!("../templates/m2.txt"),
        ActionKind::S1 => include_str!("../templates/s1.txt"),
    }
}

const PREAMBLE: &str = include_str!("../templates/preamble.txt");

/// Objective as shown to the model: lower is better for every problem.
fn objective(raw: f64) -> f64 {
    -raw
}

fn describe(p: &PoolEntry) -> &str {
    if p.description.is_empty() { "(no description)" } else { &p.description }
}

/// The heuristics a prompt shows, in display order.
fn prompt_parents(ctx: &GenerationContext) -> Vec<&PoolEntry> {
    match ctx.action {
        ActionKind::I1 => Vec::new(),
        ActionKind::M1 | ActionKind::M2 => ctx.target.iter().collect(),
        ActionKind::E2 => {
            // No.1 inspires, No.2 supplies the form.
            let Some(t) = ctx.target.as_ref() else { return ctx.parent_pool.iter().take(2).collect() };
            let donor = ctx.parent_pool.iter().find(|p| p.expr != t.expr).or(ctx.parent_pool.first());
            core::iter::once(t).chain(donor).collect()
        }
        ActionKind::E1 | ActionKind::S1 => ctx.parent_pool.iter().collect(),
    }
}

/// Fills the action template for `ctx`; deterministic.
pub fn build_prompt(ctx: &GenerationContext) -> String {
    let parents = prompt_parents(ctx);
    let mut block = String::new();
    if matches!(ctx.action, ActionKind::M1 | ActionKind::M2) {
        if let Some(p) = parents.first() {
            let _ = write!(block, "# Its Description\n{}\n# Its Code\n```dsl\n{}\n```", describe(p), p.expr);
        }
    } else {
        for (i, p) in parents.iter().enumerate() {
            if i > 0 {
                block.push('\n');
            }
            let _ = write!(
                block,
                "No.{} algorithm's description, its corresponding code, and its objective value are:\n{}\n```dsl\n{}\n```\nObjective value: {:.6}\n",
                i + 1,
                describe(p),
                p.expr,
                objective(p.raw_score),
            );
        }
    }
    let mut features = String::new();
    for f in ctx.schema().features {
        let _ = writeln!(features, "  {}: {}", f.name, f.unit);
    }
    let preamble = PREAMBLE.replace("{features}", features.trim_end());
    let body = template(ctx.action)
        .replace("{task}", ctx.task_description())
        .replace("{k}", &parents.len().to_string())
        .replace("{parents}", block.trim_end())
        .replace("{signature}", signature(ctx.kind));
    format!("{preamble}{body}")
}

/// Strips every `{...}` span from a line.
fn strip_braces(line: &str) -> String {
    let mut out = String::new();
    let mut depth = 0usize;
    for c in line.chars() {
        match c {
            '{' => depth += 1,
            '}' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

fn fenced_blocks(reply: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in reply.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(b) => blocks.push(b),
                // Opening fence; a language tag on it is ignored.
                None => current = Some(String::new()),
            }
        } else if let Some(b) = current.as_mut() {
            b.push_str(line);
            b.push('\n');
        }
    }
    blocks
}

/// Reads a description and an expression out of a model reply.
///
/// The description is the first `{...}` span. The expression is the first
/// fenced block that parses, otherwise the first line (outside fences, with
/// brace spans removed) that parses.
pub fn extract_heuristic(reply: &str, schema: &FeatureSchema) -> Result<(Expr, String), ExtractError> {
    if reply.trim().is_empty() {
        return Err(ExtractError::Empty);
    }
    let description = reply
        .find('{')
        .and_then(|start| reply[start + 1..].find('}').map(|len| reply[start + 1..start + 1 + len].trim().to_string()))
        .unwrap_or_default();

    let mut unknown: Option<String> = None;
    let mut attempt = |text: &str| match parse(text.trim(), schema) {
        Ok(e) => Some(e),
        Err(err) => {
            if let ParseErrorKind::UnknownVariable(name) = err.kind {
                unknown.get_or_insert(name);
            }
            None
        }
    };

    let fenced = fenced_blocks(reply);
    let mut found = fenced.iter().find_map(|b| attempt(b));
    if found.is_none() {
        let mut in_fence = false;
        for line in reply.lines() {
            if line.trim_start().starts_with("```") {
                in_fence = !in_fence;
                continue;
            }
            let stripped = strip_braces(line);
            if in_fence || stripped.trim().is_empty() {
                continue;
            }
            if let Some(e) = attempt(&stripped) {
                found = Some(e);
                break;
            }
        }
    }
    match (found, unknown) {
        (Some(e), _) => Ok((e, description)),
        (None, Some(name)) => Err(ExtractError::SchemaViolation(name)),
        (None, None) => Err(ExtractError::NoExpression),
    }
}
