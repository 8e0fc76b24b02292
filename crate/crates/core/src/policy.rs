//! Selection: clade-level Thompson sampling and the UCT baseline.
//!
//! Both policies descend from the root through unfrozen children until they
//! reach a node without unfrozen children, which becomes the expansion
//! target.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::belief::{self, BeliefError, BetaParams};
use crate::rng::Rng;
use crate::tree::{NodeId, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SelectionMode {
    /// Thompson sampling over stabilized, tempered clade beliefs.
    CladeThompson,
    /// The same sampler over node-local beliefs (no clade aggregation).
    NodeThompson,
    /// Mean-plus-bonus baseline on node-local means.
    Uct,
}

impl SelectionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionMode::CladeThompson => "clade_thompson",
            SelectionMode::NodeThompson => "node_thompson",
            SelectionMode::Uct => "uct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clade_thompson" => Some(Self::CladeThompson),
            "node_thompson" => Some(Self::NodeThompson),
            "uct" => Some(Self::Uct),
            _ => None,
        }
    }
}

/// Which expectation splits the stabilization pseudo-counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StabilizationMean {
    /// Mean of the belief being sampled (the clade belief in clade mode).
    Clade,
    /// Mean of the child's own outcomes only.
    NodeLocal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PolicyConfig {
    pub n_pseudo: f64,
    pub omega_cool: f64,
    /// Total evaluation budget.
    pub budget: u64,
    pub uct_c: f64,
    pub mode: SelectionMode,
    pub stabilization: StabilizationMean,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            n_pseudo: 10.0,
            omega_cool: 1.0,
            budget: 1000,
            uct_c: 1.41,
            mode: SelectionMode::CladeThompson,
            stabilization: StabilizationMean::Clade,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.budget == 0 {
            return Err(PolicyError::InvalidConfig("budget must be >= 1"));
        }
        if !(self.omega_cool > 0.0) || !self.omega_cool.is_finite() {
            return Err(PolicyError::InvalidConfig("omega_cool must be finite and > 0"));
        }
        if !(self.n_pseudo >= 0.0) || !self.n_pseudo.is_finite() {
            return Err(PolicyError::InvalidConfig("n_pseudo must be finite and >= 0"));
        }
        if !(self.uct_c >= 0.0) || !self.uct_c.is_finite() {
            return Err(PolicyError::InvalidConfig("uct_c must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("search exhausted: every child of the root is frozen")]
    SearchExhausted,
    #[error("invalid policy configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Root-to-chosen chain.
    pub path: Vec<NodeId>,
    pub chosen: NodeId,
    /// Per-candidate draw (Thompson) or score (UCT).
    pub samples: BTreeMap<NodeId, f64>,
    /// Annealing factor used for this selection (1 for UCT).
    pub temperature: f64,
}

/// Search progress `evals_done / budget`, clamped to `1 - 1/budget`.
pub fn progress(evals_done: u64, budget: u64) -> f64 {
    let budget = budget.max(1);
    let p = evals_done as f64 / budget as f64;
    p.min(1.0 - 1.0 / budget as f64)
}

/// Annealing factor at the given point of the budget.
pub fn annealing_temperature(evals_done: u64, cfg: &PolicyConfig) -> Result<f64, BeliefError> {
    belief::temperature(progress(evals_done, cfg.budget), cfg.omega_cool)
}

/// `q + c * sqrt(ln(parent_visits + 1) / child_visits)`; unvisited children
/// score `+inf`.
///
/// Visit counts are taken as reals so the formula can be probed off-lattice.
pub fn uct_score(child_visits: f64, parent_visits: f64, q_value: f64, c: f64) -> f64 {
    if child_visits <= 0.0 {
        return f64::INFINITY;
    }
    q_value + c * libm::sqrt(libm::log(parent_visits + 1.0) / child_visits)
}

/// Dispatches on `cfg.mode`.
pub fn select<H>(
    tree: &Tree<H>,
    cfg: &PolicyConfig,
    evals_done: u64,
    rng: &mut Rng,
) -> Result<SelectionResult, PolicyError> {
    match cfg.mode {
        SelectionMode::Uct => select_uct(tree, cfg, rng),
        _ => select_thompson(tree, cfg, evals_done, rng),
    }
}

fn root_candidates<H>(tree: &Tree<H>) -> Result<Vec<NodeId>, PolicyError> {
    let root = tree.root();
    let candidates = tree.unfrozen_children(NodeId::ROOT).expect("root exists");
    if candidates.is_empty() && !root.children.is_empty() {
        return Err(PolicyError::SearchExhausted);
    }
    Ok(candidates)
}

/// The stabilized belief a child is sampled from, before tempering.
pub fn stabilized_belief<H>(tree: &Tree<H>, child: NodeId, cfg: &PolicyConfig) -> BetaParams {
    let n = tree.node(child).expect("child of a tree node");
    let base = match cfg.mode {
        SelectionMode::NodeThompson => n.local,
        _ => n.clade,
    };
    let mean = match cfg.stabilization {
        StabilizationMean::Clade => base.mean(),
        StabilizationMean::NodeLocal => n.local.mean(),
    };
    base.stabilize(mean, cfg.n_pseudo)
}

pub fn select_thompson<H>(
    tree: &Tree<H>,
    cfg: &PolicyConfig,
    evals_done: u64,
    rng: &mut Rng,
) -> Result<SelectionResult, PolicyError> {
    let tau = annealing_temperature(evals_done, cfg)?;
    let mut candidates = root_candidates(tree)?;
    let mut current = NodeId::ROOT;
    let mut path = vec![current];
    let mut samples = BTreeMap::new();
    while !candidates.is_empty() {
        let mut best: Option<(f64, NodeId)> = None;
        for &c in &candidates {
            let theta = stabilized_belief(tree, c, cfg).temper(tau)?.sample(rng);
            samples.insert(c, theta);
            best = match best {
                Some((s, id)) if s > theta || (s == theta && id < c) => Some((s, id)),
                _ => Some((theta, c)),
            };
        }
        current = best.expect("nonempty candidates").1;
        path.push(current);
        candidates = tree.unfrozen_children(current).expect("child exists");
    }
    Ok(SelectionResult {
        path,
        chosen: current,
        samples,
        temperature: tau,
    })
}

pub fn select_uct<H>(
    tree: &Tree<H>,
    cfg: &PolicyConfig,
    _rng: &mut Rng,
) -> Result<SelectionResult, PolicyError> {
    let mut candidates = root_candidates(tree)?;
    let mut current = NodeId::ROOT;
    let mut path = vec![current];
    let mut samples = BTreeMap::new();
    while !candidates.is_empty() {
        let parent_visits = tree.node(current).expect("on path").visits;
        let mut best: Option<(f64, NodeId)> = None;
        for &c in &candidates {
            let n = tree.node(c).expect("child exists");
            let score = uct_score(n.visits as f64, parent_visits as f64, n.local.mean(), cfg.uct_c);
            samples.insert(c, score);
            best = match best {
                Some((s, id)) if s > score || (s == score && id < c) => Some((s, id)),
                _ => Some((score, c)),
            };
        }
        current = best.expect("nonempty candidates").1;
        path.push(current);
        candidates = tree.unfrozen_children(current).expect("child exists");
    }
    Ok(SelectionResult {
        path,
        chosen: current,
        samples,
        temperature: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeConfig;

    fn tree() -> Tree<()> {
        Tree::new(TreeConfig::default()).unwrap()
    }

    #[test]
    fn progress_examples() {
        assert_eq!(progress(0, 1000), 0.0);
        assert_eq!(progress(500, 1000), 0.5);
        assert_eq!(progress(1000, 1000), 0.999);
        assert_eq!(progress(5, 1), 0.0);
    }

    #[test]
    fn uct_score_examples() {
        assert_eq!(uct_score(1.0, 0.0, 0.5, 1.0), 0.5);
        let e_minus_one = core::f64::consts::E - 1.0;
        assert!((uct_score(1.0, e_minus_one, 0.5, 1.0) - 1.5).abs() < 1e-12);
        assert_eq!(uct_score(0.0, 10.0, 0.2, 1.0), f64::INFINITY);
    }

    #[test]
    fn empty_root_is_chosen() {
        let t = tree();
        let mut rng = Rng::seed_from_u64(0);
        let r = select_thompson(&t, &PolicyConfig::default(), 0, &mut rng).unwrap();
        assert_eq!(r.chosen, NodeId::ROOT);
        assert_eq!(r.path, vec![NodeId::ROOT]);
        let r = select_uct(&t, &PolicyConfig::default(), &mut rng).unwrap();
        assert_eq!(r.chosen, NodeId::ROOT);
    }

    #[test]
    fn exhausted_when_all_root_children_frozen() {
        let mut t = tree();
        let a = t.add_child(NodeId::ROOT, ()).unwrap();
        t.freeze_clade(a).unwrap();
        let mut rng = Rng::seed_from_u64(0);
        assert_eq!(
            select_thompson(&t, &PolicyConfig::default(), 0, &mut rng),
            Err(PolicyError::SearchExhausted)
        );
        assert_eq!(
            select_uct(&t, &PolicyConfig::default(), &mut rng),
            Err(PolicyError::SearchExhausted)
        );
    }

    #[test]
    fn never_descends_into_frozen() {
        let mut t = tree();
        let a = t.add_child(NodeId::ROOT, ()).unwrap();
        let b = t.add_child(NodeId::ROOT, ()).unwrap();
        let a1 = t.add_child(a, ()).unwrap();
        for _ in 0..50 {
            t.record_outcome(a1, 1.0).unwrap();
        }
        t.freeze_clade(a1).unwrap();
        let mut rng = Rng::seed_from_u64(5);
        for i in 0..200 {
            let r = select_thompson(&t, &PolicyConfig::default(), i, &mut rng).unwrap();
            assert!(r.chosen == a || r.chosen == b);
            assert!(r.path.iter().all(|id| !t.node(*id).unwrap().frozen));
        }
    }

    #[test]
    fn path_follows_parent_links() {
        let mut t = tree();
        let a = t.add_child(NodeId::ROOT, ()).unwrap();
        let b = t.add_child(a, ()).unwrap();
        let c = t.add_child(b, ()).unwrap();
        let mut rng = Rng::seed_from_u64(1);
        let r = select_thompson(&t, &PolicyConfig::default(), 3, &mut rng).unwrap();
        assert_eq!(r.path, vec![NodeId::ROOT, a, b, c]);
        assert_eq!(r.path, t.path_from_root(r.chosen).unwrap());
    }

    #[test]
    fn identical_children_deterministic_under_seed() {
        let mut t = tree();
        t.add_child(NodeId::ROOT, ()).unwrap();
        t.add_child(NodeId::ROOT, ()).unwrap();
        let cfg = PolicyConfig::default();
        let a = select_thompson(&t, &cfg, 0, &mut Rng::seed_from_u64(77)).unwrap();
        let b = select_thompson(&t, &cfg, 0, &mut Rng::seed_from_u64(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uct_prefers_unvisited_then_greedy_at_zero_c() {
        let mut t = tree();
        let a = t.add_child(NodeId::ROOT, ()).unwrap();
        let b = t.add_child(NodeId::ROOT, ()).unwrap();
        t.record_outcome(a, 1.0).unwrap();
        let mut rng = Rng::seed_from_u64(0);
        let cfg = PolicyConfig { mode: SelectionMode::Uct, ..PolicyConfig::default() };
        assert_eq!(select_uct(&t, &cfg, &mut rng).unwrap().chosen, b);

        let mut t = tree();
        let hi = t.add_child(NodeId::ROOT, ()).unwrap();
        let lo = t.add_child(NodeId::ROOT, ()).unwrap();
        for _ in 0..5 {
            t.record_outcome(hi, 0.9).unwrap();
            t.record_outcome(lo, 0.1).unwrap();
        }
        let greedy = PolicyConfig { uct_c: 0.0, ..cfg };
        assert_eq!(select_uct(&t, &greedy, &mut rng).unwrap().chosen, hi);
    }

    #[test]
    fn stabilization_mean_switch() {
        let mut t = tree();
        let a = t.add_child(NodeId::ROOT, ()).unwrap();
        let child = t.add_child(a, ()).unwrap();
        t.record_outcome(a, 0.0).unwrap();
        for _ in 0..4 {
            t.record_outcome(child, 1.0).unwrap();
        }
        let clade = t.node(a).unwrap().clade;
        let local = t.node(a).unwrap().local;
        let cfg = PolicyConfig::default();
        assert_eq!(stabilized_belief(&t, a, &cfg), clade.stabilize(clade.mean(), 10.0));
        let nl = PolicyConfig { stabilization: StabilizationMean::NodeLocal, ..cfg };
        assert_eq!(stabilized_belief(&t, a, &nl), clade.stabilize(local.mean(), 10.0));
        let node = PolicyConfig { mode: SelectionMode::NodeThompson, ..cfg };
        assert_eq!(stabilized_belief(&t, a, &node), local.stabilize(local.mean(), 10.0));
    }
}
