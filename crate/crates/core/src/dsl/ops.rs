//! Genetic operators over expressions.
//!
//! Every operator re-validates its result against the depth and size limits
//! and retries up to [`OPERATOR_RETRIES`] times before falling back to an
//! unchanged input.

use alloc::vec::Vec;

use super::{BinaryOp, Expr, FeatureSchema, UnaryOp};
use crate::rng::Rng;

pub const OPERATOR_RETRIES: usize = 8;

/// Depth bound for subtrees grown by structural mutation.
const MUTATION_DEPTH: usize = 3;
/// Standard deviation of the log-normal constant perturbation.
const PARAM_SIGMA: f64 = 0.3;

fn random_terminal(schema: &FeatureSchema, rng: &mut Rng) -> Expr {
    if schema.is_empty() || rng.bernoulli(0.4) {
        Expr::Const(rng.uniform_range(-2.0, 2.0))
    } else {
        Expr::Var(schema.feature(rng.below(schema.len())))
    }
}

fn grow(schema: &FeatureSchema, rng: &mut Rng, depth: usize, max_depth: usize) -> Expr {
    if depth >= max_depth {
        return random_terminal(schema, rng);
    }
    // Terminal probability rises linearly from 0.15 at the root to 1 at max_depth.
    let p_terminal = 0.15 + 0.85 * depth as f64 / max_depth as f64;
    if rng.bernoulli(p_terminal) {
        return random_terminal(schema, rng);
    }
    let roll = rng.uniform();
    if roll < 0.3 {
        let op = UnaryOp::ALL[rng.below(UnaryOp::ALL.len())];
        Expr::unary(op, grow(schema, rng, depth + 1, max_depth))
    } else if roll < 0.9 {
        let op = BinaryOp::ALL[rng.below(BinaryOp::ALL.len())];
        let a = grow(schema, rng, depth + 1, max_depth);
        let b = grow(schema, rng, depth + 1, max_depth);
        Expr::binary(op, a, b)
    } else {
        let a = grow(schema, rng, depth + 1, max_depth);
        let b = grow(schema, rng, depth + 1, max_depth);
        let t = grow(schema, rng, depth + 1, max_depth);
        let e = grow(schema, rng, depth + 1, max_depth);
        Expr::if_less(a, b, t, e)
    }
}

/// Grow-method random expression of depth at most `max_depth`.
///
/// Constants are uniform in `[-2, 2]`. Draws that break the size limit are
/// redrawn; after the retry budget a single terminal is returned.
pub fn random_expr(schema: &FeatureSchema, rng: &mut Rng, max_depth: usize) -> Expr {
    let max_depth = max_depth.min(super::MAX_DEPTH);
    for _ in 0..OPERATOR_RETRIES {
        let e = grow(schema, rng, 0, max_depth);
        if e.within_limits() {
            return e;
        }
    }
    random_terminal(schema, rng)
}

/// Replaces one uniformly chosen subtree with a fresh random expression.
pub fn mutate_structural(e: &Expr, schema: &FeatureSchema, rng: &mut Rng) -> Expr {
    let size = e.size();
    for _ in 0..OPERATOR_RETRIES {
        let at = rng.below(size);
        let fresh = random_expr(schema, rng, MUTATION_DEPTH);
        let out = e.replace_subtree(at, fresh);
        if out.within_limits() {
            return out;
        }
    }
    e.clone()
}

fn lognormal_factor(rng: &mut Rng) -> f64 {
    libm::exp(PARAM_SIGMA * rng.normal())
}

/// Perturbs constants multiplicatively, each with probability 1/2.
///
/// An expression without constants instead gets one variable wrapped as
/// `mul(c, var)`.
pub fn mutate_parametric(e: &Expr, rng: &mut Rng) -> Expr {
    if e.const_count() > 0 {
        let mut out = e.clone();
        out.for_each_const_mut(&mut |c| {
            if rng.bernoulli(0.5) {
                *c = (*c * lognormal_factor(rng)).clamp(-1e6, 1e6);
            }
        });
        return out;
    }
    let mut positions = e.var_positions();
    while !positions.is_empty() {
        let pick = positions.swap_remove(rng.below(positions.len()));
        let var = e.subtree(pick).expect("position from var_positions").clone();
        let wrapped = Expr::binary(BinaryOp::Mul, Expr::Const(lognormal_factor(rng)), var);
        let out = e.replace_subtree(pick, wrapped);
        if out.within_limits() {
            return out;
        }
    }
    e.clone()
}

/// Transplants a random subtree of `a` into a random position of `b`.
pub fn crossover(a: &Expr, b: &Expr, rng: &mut Rng) -> Expr {
    let (size_a, size_b) = (a.size(), b.size());
    for _ in 0..OPERATOR_RETRIES {
        let donor = a.subtree(rng.below(size_a)).expect("in range").clone();
        let out = b.replace_subtree(rng.below(size_b), donor);
        if out.within_limits() {
            return out;
        }
    }
    b.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlendVariant {
    /// A fresh expression whose structure differs from every parent.
    Novel,
    /// `add(mul(w1, p), mul(w2, q))` over fragments of two distinct parents.
    WeightedSum,
}

/// Combines a parent population. Requires at least two parents.
pub fn blend(parents: &[Expr], variant: BlendVariant, schema: &FeatureSchema, rng: &mut Rng) -> Expr {
    assert!(parents.len() >= 2, "blend needs at least two parents");
    match variant {
        BlendVariant::Novel => {
            let taken: Vec<u64> = parents.iter().map(Expr::structure_hash).collect();
            for _ in 0..OPERATOR_RETRIES {
                let candidate = random_expr(schema, rng, 4);
                if !taken.contains(&candidate.structure_hash()) {
                    return candidate;
                }
            }
            mutate_structural(&parents[0], schema, rng)
        }
        BlendVariant::WeightedSum => {
            let i = rng.below(parents.len());
            let j = (i + 1 + rng.below(parents.len() - 1)) % parents.len();
            for attempt in 0..OPERATOR_RETRIES {
                // Whole parents first; later attempts shrink to random fragments.
                let (p, q) = if attempt == 0 {
                    (parents[i].clone(), parents[j].clone())
                } else {
                    (
                        parents[i].subtree(rng.below(parents[i].size())).expect("in range").clone(),
                        parents[j].subtree(rng.below(parents[j].size())).expect("in range").clone(),
                    )
                };
                let w1 = rng.uniform();
                let w2 = rng.uniform();
                let out = Expr::binary(
                    BinaryOp::Add,
                    Expr::binary(BinaryOp::Mul, Expr::Const(w1), p),
                    Expr::binary(BinaryOp::Mul, Expr::Const(w2), q),
                );
                if out.within_limits() {
                    return out;
                }
            }
            parents[i].clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, KP_SCHEMA, MAX_DEPTH, TSP_SCHEMA};
    use alloc::format;
    use alloc::string::String;

    #[test]
    fn depth_zero_is_terminal() {
        let mut rng = Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(random_expr(&TSP_SCHEMA, &mut rng, 0).is_terminal());
        }
    }

    #[test]
    fn random_expr_is_reproducible() {
        let a = random_expr(&TSP_SCHEMA, &mut Rng::seed_from_u64(5), 4);
        let b = random_expr(&TSP_SCHEMA, &mut Rng::seed_from_u64(5), 4);
        assert_eq!(a, b);
    }

    #[test]
    fn constants_in_range() {
        let mut rng = Rng::seed_from_u64(2);
        for _ in 0..500 {
            if let Expr::Const(c) = random_terminal(&TSP_SCHEMA, &mut rng) {
                assert!((-2.0..=2.0).contains(&c));
            }
        }
    }

    #[test]
    fn structural_mutation_of_constant() {
        let mut rng = Rng::seed_from_u64(3);
        for _ in 0..200 {
            let m = mutate_structural(&Expr::Const(1.0), &TSP_SCHEMA, &mut rng);
            assert!(m.depth() <= 3);
            assert!(m.within_limits());
        }
    }

    #[test]
    fn structural_mutation_of_deep_expression_stays_valid() {
        let mut deep = String::from("dist_to_cand");
        for _ in 0..MAX_DEPTH {
            deep = format!("neg({deep})");
        }
        let e = parse(&deep, &TSP_SCHEMA).unwrap();
        assert_eq!(e.depth(), MAX_DEPTH);
        let mut rng = Rng::seed_from_u64(4);
        for _ in 0..1000 {
            assert!(mutate_structural(&e, &TSP_SCHEMA, &mut rng).within_limits());
        }
    }

    #[test]
    fn parametric_without_constants_gains_one() {
        let e = parse("div_p(value, weight)", &KP_SCHEMA).unwrap();
        let m = mutate_parametric(&e, &mut Rng::seed_from_u64(6));
        assert_eq!(m.const_count(), 1);
        assert_eq!(m.size(), e.size() + 2);
    }

    #[test]
    fn parametric_preserves_structure() {
        let e = parse("add(mul(0.5, value), pow_c(weight, 2))", &KP_SCHEMA).unwrap();
        let mut rng = Rng::seed_from_u64(7);
        let mut changed = 0;
        for _ in 0..50 {
            let m = mutate_parametric(&e, &mut rng);
            assert_eq!(m.structure_hash(), e.structure_hash());
            changed += usize::from(m != e);
        }
        assert!(changed > 30);
        let a = mutate_parametric(&e, &mut Rng::seed_from_u64(8));
        let b = mutate_parametric(&e, &mut Rng::seed_from_u64(8));
        assert_eq!(a, b);
    }

    #[test]
    fn crossover_of_constants() {
        let out = crossover(&Expr::Const(1.0), &Expr::Const(2.0), &mut Rng::seed_from_u64(0));
        assert_eq!(out, Expr::Const(1.0));
    }

    #[test]
    fn weighted_blend_contains_both_parents() {
        let p = [
            parse("div_p(value, weight)", &KP_SCHEMA).unwrap(),
            parse("neg(weight)", &KP_SCHEMA).unwrap(),
        ];
        let out = blend(&p, BlendVariant::WeightedSum, &KP_SCHEMA, &mut Rng::seed_from_u64(1));
        let text = format!("{out}");
        assert!(text.starts_with("add(mul("));
        assert!(text.contains("div_p(value, weight)"));
        assert!(text.contains("neg(weight)"));
    }

    #[test]
    fn novel_blend_differs_from_identical_parents() {
        let e = parse("div_p(value, weight)", &KP_SCHEMA).unwrap();
        let p = [e.clone(), e.clone()];
        let mut rng = Rng::seed_from_u64(2);
        for _ in 0..100 {
            let out = blend(&p, BlendVariant::Novel, &KP_SCHEMA, &mut rng);
            assert_ne!(out.structure_hash(), e.structure_hash());
        }
        let a = blend(&p, BlendVariant::Novel, &KP_SCHEMA, &mut Rng::seed_from_u64(3));
        let b = blend(&p, BlendVariant::Novel, &KP_SCHEMA, &mut Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
