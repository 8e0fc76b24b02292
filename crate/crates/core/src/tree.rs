//! The growing heuristic tree.
//!
//! Every node keeps two beliefs: `local` counts only the node's own outcomes,
//! while `clade` is the depth-attenuated aggregate over the node and all of its
//! descendants,
//!
//! ```text
//! clade(v) = prior + sum_{u in clade(v)} lambda^dist(v,u) * (local(u) - prior)
//! ```
//!
//! maintained incrementally: an outcome recorded at depth `d` below an
//! ancestor is added to that ancestor's clade with weight `lambda^d`. The
//! brute-force recomputation in [`Tree::clade_params_bruteforce`] is the
//! oracle for this bookkeeping.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use crate::belief::BetaParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("cannot expand frozen node {0}")]
    FrozenParent(NodeId),
    #[error("outcome {0} is outside [0, 1]")]
    OutcomeOutOfRange(f64),
    #[error("invalid tree configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TreeConfig {
    /// Depth decay of clade aggregation. `0` is the myopic node-centric case.
    pub lambda_decay: f64,
    pub prior_alpha: f64,
    pub prior_beta: f64,
    /// Freezing threshold relative to the global best clade mean.
    pub gamma_freeze: f64,
    /// Minimum clade visits before a node may be frozen.
    pub v_min: u64,
    /// Evaluations between freeze sweeps.
    pub freeze_check_interval: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            lambda_decay: 0.8,
            prior_alpha: 1.0,
            prior_beta: 1.0,
            gamma_freeze: 0.1,
            v_min: 10,
            freeze_check_interval: 10,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<(), TreeError> {
        if !(0.0..=1.0).contains(&self.lambda_decay) {
            return Err(TreeError::InvalidConfig("lambda_decay must lie in [0, 1]"));
        }
        if !(self.gamma_freeze > 0.0 && self.gamma_freeze < 1.0) {
            return Err(TreeError::InvalidConfig("gamma_freeze must lie in (0, 1)"));
        }
        if BetaParams::new(self.prior_alpha, self.prior_beta).is_err() {
            return Err(TreeError::InvalidConfig("priors must be finite and > 0"));
        }
        if self.v_min == 0 {
            return Err(TreeError::InvalidConfig("v_min must be >= 1"));
        }
        if self.freeze_check_interval == 0 {
            return Err(TreeError::InvalidConfig("freeze_check_interval must be >= 1"));
        }
        Ok(())
    }

    fn prior(&self) -> BetaParams {
        BetaParams::new(self.prior_alpha, self.prior_beta).expect("validated priors")
    }
}

#[derive(Debug, Clone)]
pub struct SearchNode<H> {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub depth: u32,
    /// `None` for the virtual root and for failed generations.
    pub heuristic: Option<H>,
    pub local: BetaParams,
    pub clade: BetaParams,
    /// Evaluations recorded anywhere inside this node's clade.
    pub visits: u64,
    pub own_evals: u64,
    pub frozen: bool,
    /// Best raw objective seen inside the clade, maintained by the caller.
    pub best_raw_score: Option<f64>,
    pub created_at_eval: u64,
}

#[derive(Debug, Clone)]
pub struct Tree<H> {
    cfg: TreeConfig,
    prior: BetaParams,
    nodes: Vec<SearchNode<H>>,
    frozen_count: usize,
    outcomes_recorded: u64,
}

impl<H> Tree<H> {
    /// A tree holding only the virtual root.
    pub fn new(cfg: TreeConfig) -> Result<Self, TreeError> {
        cfg.validate()?;
        let prior = cfg.prior();
        let root = SearchNode {
            id: NodeId::ROOT,
            parent: None,
            children: Vec::new(),
            depth: 0,
            heuristic: None,
            local: prior,
            clade: prior,
            visits: 0,
            own_evals: 0,
            frozen: false,
            best_raw_score: None,
            created_at_eval: 0,
        };
        Ok(Self {
            cfg,
            prior,
            nodes: vec![root],
            frozen_count: 0,
            outcomes_recorded: 0,
        })
    }

    pub fn config(&self) -> &TreeConfig {
        &self.cfg
    }

    pub fn prior(&self) -> BetaParams {
        self.prior
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> &SearchNode<H> {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> Result<&SearchNode<H>, TreeError> {
        self.nodes.get(id.0).ok_or(TreeError::UnknownNode(id))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SearchNode<H>> {
        self.nodes.iter()
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen_count
    }

    pub fn outcomes_recorded(&self) -> u64 {
        self.outcomes_recorded
    }

    pub fn add_child(&mut self, parent: NodeId, heuristic: H) -> Result<NodeId, TreeError> {
        self.attach(parent, Some(heuristic))
    }

    /// Attaches a child with no heuristic, used when generation failed.
    pub fn add_failed_child(&mut self, parent: NodeId) -> Result<NodeId, TreeError> {
        self.attach(parent, None)
    }

    fn attach(&mut self, parent: NodeId, heuristic: Option<H>) -> Result<NodeId, TreeError> {
        let p = self.node(parent)?;
        if p.frozen {
            return Err(TreeError::FrozenParent(parent));
        }
        let depth = p.depth + 1;
        let id = NodeId(self.nodes.len());
        self.nodes.push(SearchNode {
            id,
            parent: Some(parent),
            children: Vec::new(),
            depth,
            heuristic,
            local: self.prior,
            clade: self.prior,
            visits: 0,
            own_evals: 0,
            frozen: false,
            best_raw_score: None,
            created_at_eval: self.outcomes_recorded,
        });
        self.nodes[parent.0].children.push(id);
        Ok(id)
    }

    /// Records one outcome at `id` and propagates it to every ancestor with
    /// weight `lambda^distance`.
    pub fn record_outcome(&mut self, id: NodeId, outcome: f64) -> Result<(), TreeError> {
        self.node(id)?;
        if !(0.0..=1.0).contains(&outcome) {
            return Err(TreeError::OutcomeOutOfRange(outcome));
        }
        let lambda = self.cfg.lambda_decay;
        {
            let n = &mut self.nodes[id.0];
            n.local.absorb(outcome, 1.0);
            n.own_evals += 1;
        }
        let mut weight = 1.0;
        let mut cursor = Some(id);
        while let Some(c) = cursor {
            let n = &mut self.nodes[c.0];
            n.clade.absorb(outcome, weight);
            n.visits += 1;
            weight *= lambda;
            cursor = n.parent;
        }
        self.outcomes_recorded += 1;
        Ok(())
    }

    /// Folds `raw` into the clade-best bookkeeping of `id` and its ancestors.
    pub fn note_raw_score(&mut self, id: NodeId, raw: f64) -> Result<(), TreeError> {
        self.node(id)?;
        let mut cursor = Some(id);
        while let Some(c) = cursor {
            let n = &mut self.nodes[c.0];
            n.best_raw_score = Some(match n.best_raw_score {
                Some(b) if b >= raw => b,
                _ => raw,
            });
            cursor = n.parent;
        }
        Ok(())
    }

    /// Recomputes the clade aggregate of `id` by walking its whole subtree.
    pub fn clade_params_bruteforce(&self, id: NodeId) -> Result<BetaParams, TreeError> {
        self.node(id)?;
        let lambda = self.cfg.lambda_decay;
        let (pa, pb) = (self.prior.alpha(), self.prior.beta());
        let (mut a, mut b) = (pa, pb);
        let mut stack = vec![(id, 0i32)];
        while let Some((u, d)) = stack.pop() {
            let n = &self.nodes[u.0];
            let w = libm::pow(lambda, d as f64);
            a += w * (n.local.alpha() - pa);
            b += w * (n.local.beta() - pb);
            stack.extend(n.children.iter().map(|&c| (c, d + 1)));
        }
        Ok(BetaParams::new(a, b).expect("aggregate of valid counts"))
    }

    pub fn unfrozen_children(&self, id: NodeId) -> Result<Vec<NodeId>, TreeError> {
        Ok(self
            .node(id)?
            .children
            .iter()
            .copied()
            .filter(|c| !self.nodes[c.0].frozen)
            .collect())
    }

    /// Node ids of the clade rooted at `id`, in preorder.
    pub fn clade_members(&self, id: NodeId) -> Result<Vec<NodeId>, TreeError> {
        self.node(id)?;
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(u) = stack.pop() {
            out.push(u);
            stack.extend(self.nodes[u.0].children.iter().rev().copied());
        }
        Ok(out)
    }

    /// Root-to-`id` chain of node ids.
    pub fn path_from_root(&self, id: NodeId) -> Result<Vec<NodeId>, TreeError> {
        self.node(id)?;
        let mut path = Vec::new();
        let mut cursor = Some(id);
        while let Some(c) = cursor {
            path.push(c);
            cursor = self.nodes[c.0].parent;
        }
        path.reverse();
        Ok(path)
    }

    /// Freezes `id` and its whole clade. Returns the ids that changed state.
    pub fn freeze_clade(&mut self, id: NodeId) -> Result<Vec<NodeId>, TreeError> {
        let members = self.clade_members(id)?;
        let mut newly = Vec::new();
        for m in members {
            let n = &mut self.nodes[m.0];
            if !n.frozen {
                n.frozen = true;
                newly.push(m);
            }
        }
        self.frozen_count += newly.len();
        Ok(newly)
    }

    /// Highest clade mean among unfrozen non-root nodes.
    pub fn global_best_mean(&self) -> Option<f64> {
        self.nodes[1..]
            .iter()
            .filter(|n| !n.frozen)
            .map(|n| n.clade.mean())
            .fold(None, |acc, m| Some(acc.map_or(m, |a: f64| a.max(m))))
    }

    /// Freezes every unfrozen non-root node whose clade has at least `v_min`
    /// visits and a mean below `gamma * global_best_mean`, together with its
    /// descendants. Returns the ids frozen by this sweep in ascending order.
    ///
    /// Clades holding an unfrozen node whose mean reaches `global_best_mean`
    /// are exempt: with `lambda < 1` a weak ancestor can fall below the
    /// threshold while its descendant leads the tree.
    pub fn freeze_sweep(&mut self, global_best_mean: f64) -> Vec<NodeId> {
        let threshold = self.cfg.gamma_freeze * global_best_mean;
        let v_min = self.cfg.v_min;
        let mut protected = vec![false; self.nodes.len()];
        for n in &self.nodes[1..] {
            if !n.frozen && n.clade.mean() >= global_best_mean {
                let mut cur = Some(n.id);
                while let Some(id) = cur.filter(|id| !protected[id.0]) {
                    protected[id.0] = true;
                    cur = self.nodes[id.0].parent;
                }
            }
        }
        let targets: Vec<NodeId> = self.nodes[1..]
            .iter()
            .filter(|n| !n.frozen && !protected[n.id.0] && n.visits >= v_min && n.clade.mean() < threshold)
            .map(|n| n.id)
            .collect();
        let mut newly = Vec::new();
        for t in targets {
            newly.extend(self.freeze_clade(t).expect("id taken from the tree"));
        }
        newly.sort_unstable();
        newly
    }

    /// Line-oriented snapshot, one node per line:
    /// `id parent depth local_alpha local_beta clade_alpha clade_beta frozen expr`,
    /// tab separated, parent `-` for the root and expression `-` when absent.
    pub fn snapshot_text<F>(&self, mut render: F) -> String
    where
        F: FnMut(&H) -> String,
    {
        let mut out = String::new();
        out.push_str(
            "# id\tparent\tdepth\tlocal_alpha\tlocal_beta\tclade_alpha\tclade_beta\tfrozen\texpr\n",
        );
        for n in &self.nodes {
            let parent = match n.parent {
                Some(p) => alloc::format!("{p}"),
                None => String::from("-"),
            };
            let expr = n.heuristic.as_ref().map_or_else(|| String::from("-"), &mut render);
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{}\t{}",
                n.id,
                parent,
                n.depth,
                n.local.alpha(),
                n.local.beta(),
                n.clade.alpha(),
                n.clade.beta(),
                u8::from(n.frozen),
                expr
            );
        }
        out
    }
}
