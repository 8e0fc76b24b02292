//! Priority-function language used as the heuristic medium.
//!
//! An [`Expr`] maps a feature vector to a score; problem evaluators pick the
//! candidate with the highest score. Every operator is protected so
//! evaluation is total: any finite input yields a finite output.
//!
//! The text form is documented in `GRAMMAR.md` at the repository root.

mod ops;
mod parse;
mod schema;

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::hash::Hasher;

pub use ops::{
    blend, crossover, mutate_parametric, mutate_structural, random_expr, BlendVariant,
    OPERATOR_RETRIES,
};
pub use parse::{parse, ParseError, ParseErrorKind};
pub use schema::{
    Feature, FeatureSchema, FeatureSpec, ProblemKind, ACO_TSP_SCHEMA, BPP_SCHEMA, KP_SCHEMA,
    TSP_SCHEMA,
};

pub const MAX_DEPTH: usize = 8;
pub const MAX_NODES: usize = 64;

/// `div_p` returns its numerator when the denominator is smaller than this.
pub const DIV_EPS: f64 = 1e-9;
/// Every intermediate result saturates to `[-VALUE_BOUND, VALUE_BOUND]`.
pub const VALUE_BOUND: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Abs,
    /// `sqrt(|x|)`
    SqrtP,
    /// `ln|x|`, with `log_p(0) = 0`
    LogP,
    /// `exp(clamp(x, -30, 30))`
    ExpC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    DivP,
    Min,
    Max,
    /// `max(a, 0) ^ clamp(b, -5, 5)`
    PowC,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 5] = [UnaryOp::Neg, UnaryOp::Abs, UnaryOp::SqrtP, UnaryOp::LogP, UnaryOp::ExpC];

    pub fn name(&self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Abs => "abs",
            UnaryOp::SqrtP => "sqrt_p",
            UnaryOp::LogP => "log_p",
            UnaryOp::ExpC => "exp_c",
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        let v = match self {
            UnaryOp::Neg => -x,
            UnaryOp::Abs => x.abs(),
            UnaryOp::SqrtP => libm::sqrt(x.abs()),
            UnaryOp::LogP => {
                if x == 0.0 {
                    0.0
                } else {
                    libm::log(x.abs())
                }
            }
            UnaryOp::ExpC => libm::exp(x.clamp(-30.0, 30.0)),
        };
        settle(v)
    }
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 7] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::DivP,
        BinaryOp::Min,
        BinaryOp::Max,
        BinaryOp::PowC,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::DivP => "div_p",
            BinaryOp::Min => "min",
            BinaryOp::Max => "max",
            BinaryOp::PowC => "pow_c",
        }
    }

    pub fn apply(&self, a: f64, b: f64) -> f64 {
        let v = match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::DivP => {
                if b.abs() < DIV_EPS {
                    a
                } else {
                    a / b
                }
            }
            BinaryOp::Min => a.min(b),
            BinaryOp::Max => a.max(b),
            BinaryOp::PowC => libm::pow(a.max(0.0), b.clamp(-5.0, 5.0)),
        };
        settle(v)
    }
}

#[inline]
fn settle(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-VALUE_BOUND, VALUE_BOUND)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Feature),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// `iflt(a, b, then, else)`: `then` when `a < b`, otherwise `else`.
    IfLess(Box<Expr>, Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("feature `{name}` (slot {index}) missing from a vector of length {len}")]
    MissingFeature {
        name: &'static str,
        index: usize,
        len: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LimitError {
    #[error("expression depth {0} exceeds {MAX_DEPTH}")]
    TooDeep(usize),
    #[error("expression has {0} nodes, more than {MAX_NODES}")]
    TooLarge(usize),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(f: Feature) -> Expr {
        Expr::Var(f)
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn if_less(a: Expr, b: Expr, then: Expr, otherwise: Expr) -> Expr {
        Expr::IfLess(Box::new(a), Box::new(b), Box::new(then), Box::new(otherwise))
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Expr::Const(_) | Expr::Var(_))
    }

    /// Direct children in argument order.
    pub fn children(&self) -> impl Iterator<Item = &Expr> {
        let (a, b, c, d): (Option<&Expr>, Option<&Expr>, Option<&Expr>, Option<&Expr>) = match self {
            Expr::Const(_) | Expr::Var(_) => (None, None, None, None),
            Expr::Unary(_, a) => (Some(a), None, None, None),
            Expr::Binary(_, a, b) => (Some(a), Some(b), None, None),
            Expr::IfLess(a, b, c, d) => (Some(a), Some(b), Some(c), Some(d)),
        };
        a.into_iter().chain(b).chain(c).chain(d)
    }

    fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => Vec::new(),
            Expr::Unary(_, a) => alloc::vec![&mut **a],
            Expr::Binary(_, a, b) => alloc::vec![&mut **a, &mut **b],
            Expr::IfLess(a, b, c, d) => alloc::vec![&mut **a, &mut **b, &mut **c, &mut **d],
        }
    }

    /// Edges on the longest root-to-leaf path; a terminal has depth 0.
    pub fn depth(&self) -> usize {
        self.children().map(|c| c.depth() + 1).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children().map(Expr::size).sum::<usize>()
    }

    pub fn check_limits(&self) -> Result<(), LimitError> {
        let size = self.size();
        if size > MAX_NODES {
            return Err(LimitError::TooLarge(size));
        }
        let depth = self.depth();
        if depth > MAX_DEPTH {
            return Err(LimitError::TooDeep(depth));
        }
        Ok(())
    }

    pub fn within_limits(&self) -> bool {
        self.check_limits().is_ok()
    }

    pub fn evaluate(&self, features: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(f) => *features.get(f.index).ok_or(EvalError::MissingFeature {
                name: f.name,
                index: f.index,
                len: features.len(),
            })?,
            Expr::Unary(op, a) => op.apply(a.evaluate(features)?),
            Expr::Binary(op, a, b) => op.apply(a.evaluate(features)?, b.evaluate(features)?),
            Expr::IfLess(a, b, t, e) => {
                if a.evaluate(features)? < b.evaluate(features)? {
                    t.evaluate(features)?
                } else {
                    e.evaluate(features)?
                }
            }
        })
    }

    /// Subtree at preorder position `index` (0 is the whole expression).
    pub fn subtree(&self, index: usize) -> Option<&Expr> {
        fn walk<'a>(e: &'a Expr, target: usize, counter: &mut usize) -> Option<&'a Expr> {
            if *counter == target {
                return Some(e);
            }
            *counter += 1;
            for c in e.children() {
                if let Some(found) = walk(c, target, counter) {
                    return Some(found);
                }
            }
            None
        }
        walk(self, index, &mut 0)
    }

    /// Copy of `self` with the subtree at preorder `index` replaced.
    pub fn replace_subtree(&self, index: usize, replacement: Expr) -> Expr {
        fn walk(e: &mut Expr, target: usize, counter: &mut usize, rep: &mut Option<Expr>) {
            if *counter == target {
                if let Some(r) = rep.take() {
                    *e = r;
                }
                return;
            }
            *counter += 1;
            for c in e.children_mut() {
                if rep.is_none() {
                    return;
                }
                walk(c, target, counter, rep);
            }
        }
        let mut out = self.clone();
        walk(&mut out, index, &mut 0, &mut Some(replacement));
        out
    }

    /// Calls `f` on every constant, in preorder.
    pub fn for_each_const_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        if let Expr::Const(c) = self {
            f(c);
            return;
        }
        for c in self.children_mut() {
            c.for_each_const_mut(f);
        }
    }

    pub fn const_count(&self) -> usize {
        usize::from(matches!(self, Expr::Const(_))) + self.children().map(Expr::const_count).sum::<usize>()
    }

    /// Preorder positions of `Var` nodes.
    pub fn var_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self];
        let mut index = 0;
        while let Some(e) = stack.pop() {
            if matches!(e, Expr::Var(_)) {
                out.push(index);
            }
            index += 1;
            let kids: Vec<&Expr> = e.children().collect();
            stack.extend(kids.into_iter().rev());
        }
        out
    }

    /// Hash of the tree shape and operator labels, ignoring constant values.
    pub fn structure_hash(&self) -> u64 {
        fn feed(e: &Expr, h: &mut fnv::FnvHasher) {
            match e {
                Expr::Const(_) => h.write_u8(0),
                Expr::Var(f) => {
                    h.write_u8(1);
                    h.write(f.name.as_bytes());
                }
                Expr::Unary(op, _) => {
                    h.write_u8(2);
                    h.write(op.name().as_bytes());
                }
                Expr::Binary(op, _, _) => {
                    h.write_u8(3);
                    h.write(op.name().as_bytes());
                }
                Expr::IfLess(..) => h.write_u8(4),
            }
            h.write_u8(0xff);
            for c in e.children() {
                feed(c, h);
            }
        }
        let mut h = fnv::FnvHasher::default();
        feed(self, &mut h);
        h.finish()
    }
}

/// Canonical text: `op(arg, arg)`, constants in shortest round-trip form.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(v) => f.write_str(v.name),
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op, a, b) => write!(f, "{}({a}, {b})", op.name()),
            Expr::IfLess(a, b, t, e) => write!(f, "iflt({a}, {b}, {t}, {e})"),
        }
    }
}

/// The six expansion actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ActionKind {
    /// Fresh heuristic.
    I1,
    /// Divergent crossover: a form unlike every parent.
    E1,
    /// Elitist crossover with the best parent.
    E2,
    /// Structural mutation.
    M1,
    /// Parameter mutation.
    M2,
    /// Synthesis over several parents.
    S1,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] = [
        ActionKind::I1,
        ActionKind::E1,
        ActionKind::E2,
        ActionKind::M1,
        ActionKind::M2,
        ActionKind::S1,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::I1 => "i1",
            ActionKind::E1 => "e1",
            ActionKind::E2 => "e2",
            ActionKind::M1 => "m1",
            ActionKind::M2 => "m2",
            ActionKind::S1 => "s1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }

    /// Actions that draw on a population of at least two parents.
    pub fn needs_pool(&self) -> bool {
        matches!(self, ActionKind::E1 | ActionKind::E2 | ActionKind::S1)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn v(name: &str) -> Expr {
        Expr::Var(TSP_SCHEMA.lookup(name).unwrap())
    }

    #[test]
    fn constant_evaluates_to_itself() {
        assert_eq!(Expr::Const(3.5).evaluate(&[0.0; 5]).unwrap(), 3.5);
    }

    #[test]
    fn protected_division() {
        let e = Expr::binary(BinaryOp::DivP, Expr::Const(1.0), Expr::Const(0.0));
        assert_eq!(e.evaluate(&[]).unwrap(), 1.0);
        let e = Expr::binary(BinaryOp::DivP, Expr::Const(1.0), Expr::Const(4.0));
        assert_eq!(e.evaluate(&[]).unwrap(), 0.25);
    }

    #[test]
    fn neg_of_feature() {
        let e = Expr::unary(UnaryOp::Neg, v("dist_to_cand"));
        assert_eq!(e.evaluate(&[0.42, 0.0, 0.0, 0.0, 1.0]).unwrap(), -0.42);
    }

    #[test]
    fn missing_feature_is_reported() {
        let e = v("frac_remaining");
        assert!(matches!(
            e.evaluate(&[1.0, 2.0]),
            Err(EvalError::MissingFeature { index: 4, .. })
        ));
    }

    #[test]
    fn protected_ops_stay_finite() {
        assert_eq!(UnaryOp::LogP.apply(0.0), 0.0);
        assert_eq!(UnaryOp::LogP.apply(-core::f64::consts::E), 1.0);
        assert_eq!(UnaryOp::SqrtP.apply(-4.0), 2.0);
        assert_eq!(UnaryOp::ExpC.apply(1e9), libm::exp(30.0));
        assert_eq!(BinaryOp::PowC.apply(-2.0, 3.0), 0.0);
        assert_eq!(BinaryOp::PowC.apply(2.0, 100.0), 32.0);
        assert!(BinaryOp::PowC.apply(0.0, -3.0).is_finite());
        assert!(BinaryOp::Mul.apply(1e300, 1e300).is_finite());
        assert!(BinaryOp::Sub.apply(-1e300, 1e300).is_finite());
    }

    #[test]
    fn iflt_branches() {
        let e = Expr::if_less(Expr::Const(1.0), Expr::Const(2.0), Expr::Const(10.0), Expr::Const(20.0));
        assert_eq!(e.evaluate(&[]).unwrap(), 10.0);
        let e = Expr::if_less(Expr::Const(2.0), Expr::Const(2.0), Expr::Const(10.0), Expr::Const(20.0));
        assert_eq!(e.evaluate(&[]).unwrap(), 20.0);
    }

    #[test]
    fn render_canonical() {
        assert_eq!(Expr::Const(1.5).to_string(), "1.5");
        let e = Expr::binary(BinaryOp::Add, v("dist_to_cand"), Expr::Const(-2.0));
        assert_eq!(e.to_string(), "add(dist_to_cand, -2.0)");
        assert_eq!(Expr::Const(1e-7).to_string(), "1e-7");
    }

    #[test]
    fn depth_size_and_subtrees() {
        let e = Expr::binary(BinaryOp::Mul, Expr::unary(UnaryOp::Neg, v("dist_to_cand")), Expr::Const(2.0));
        assert_eq!(e.depth(), 2);
        assert_eq!(e.size(), 4);
        assert_eq!(e.subtree(2), Some(&v("dist_to_cand")));
        assert_eq!(e.subtree(3), Some(&Expr::Const(2.0)));
        assert_eq!(e.subtree(4), None);
        let r = e.replace_subtree(1, Expr::Const(0.5));
        assert_eq!(r, Expr::binary(BinaryOp::Mul, Expr::Const(0.5), Expr::Const(2.0)));
        assert_eq!(e.var_positions(), alloc::vec![2]);
        assert_eq!(e.const_count(), 1);
    }

    #[test]
    fn structure_hash_ignores_constant_values() {
        let a = Expr::binary(BinaryOp::Add, v("dist_to_cand"), Expr::Const(1.0));
        let b = Expr::binary(BinaryOp::Add, v("dist_to_cand"), Expr::Const(7.0));
        let c = Expr::binary(BinaryOp::Sub, v("dist_to_cand"), Expr::Const(1.0));
        assert_eq!(a.structure_hash(), b.structure_hash());
        assert_ne!(a.structure_hash(), c.structure_hash());
    }

    #[test]
    fn action_kinds_round_trip() {
        for a in ActionKind::ALL {
            assert_eq!(ActionKind::parse(a.as_str()), Some(a));
        }
        assert!(ActionKind::E2.needs_pool());
        assert!(!ActionKind::M1.needs_pool());
    }
}
