//! Constructive 0/1 knapsack.

use alloc::vec::Vec;

use crate::dsl::Expr;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KpInstance {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub capacity: f64,
    /// Reference total value (optimal or best known), when available.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub reference: Option<f64>,
}

impl KpInstance {
    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// Uncorrelated instances: values and weights i.i.d. `U(0, 1)`.
pub fn gen_kp(n: usize, capacity: f64, count: usize, seed: u64) -> Vec<KpInstance> {
    assert!(n >= 1, "a knapsack instance needs at least one item");
    let mut rng = Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut values = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            for _ in 0..n {
                values.push(rng.uniform());
                // Weights must be strictly positive.
                weights.push(rng.uniform().max(f64::MIN_POSITIVE));
            }
            KpInstance { values, weights, capacity, reference: None }
        })
        .collect()
}

/// Greedy packing: repeatedly take the highest-priority item that still
/// fits, ties to the lowest index. Returns the chosen item indices in order.
pub fn construct_packing(expr: &Expr, inst: &KpInstance) -> Vec<usize> {
    let n = inst.n();
    let mut left: Vec<usize> = (0..n).collect();
    let mut remaining = inst.capacity;
    let mut chosen = Vec::new();
    loop {
        let frac_left = left.len() as f64 / n as f64;
        let mut best: Option<(usize, f64)> = None;
        for (k, &i) in left.iter().enumerate() {
            if inst.weights[i] > remaining {
                continue;
            }
            let f = [inst.values[i], inst.weights[i], remaining, frac_left];
            let score = expr.evaluate(&f).expect("expression validated against the KP schema");
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((k, score));
            }
        }
        let Some((k, _)) = best else { break };
        let i = left.remove(k);
        remaining -= inst.weights[i];
        chosen.push(i);
    }
    chosen
}

/// Per-instance total values of the constructive heuristic.
pub fn eval_kp_constructive(expr: &Expr, instances: &[KpInstance]) -> Vec<f64> {
    instances
        .iter()
        .map(|inst| {
            let chosen = construct_packing(expr, inst);
            debug_assert!(chosen.iter().map(|&i| inst.weights[i]).sum::<f64>() <= inst.capacity + 1e-9);
            chosen.iter().map(|&i| inst.values[i]).sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, KP_SCHEMA};
    use alloc::vec;

    fn ratio() -> Expr {
        parse("div_p(value, weight)", &KP_SCHEMA).unwrap()
    }

    fn brute_force(inst: &KpInstance) -> f64 {
        let n = inst.n();
        (0u32..1 << n)
            .filter_map(|mask| {
                let picked = (0..n).filter(|i| mask >> i & 1 == 1);
                let w: f64 = picked.clone().map(|i| inst.weights[i]).sum();
                (w <= inst.capacity).then(|| picked.map(|i| inst.values[i]).sum())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_item_always_fits() {
        let inst = &gen_kp(1, 10.0, 1, 4)[0];
        assert_eq!(eval_kp_constructive(&ratio(), core::slice::from_ref(inst)), vec![inst.values[0]]);
    }

    #[test]
    fn zero_capacity_packs_nothing() {
        let mut inst = gen_kp(5, 0.0, 1, 1).remove(0);
        inst.capacity = 0.0;
        assert_eq!(eval_kp_constructive(&ratio(), &[inst]), vec![0.0]);
    }

    #[test]
    fn greedy_never_beats_exhaustive() {
        for inst in gen_kp(3, 1.0, 200, 7) {
            let greedy = eval_kp_constructive(&ratio(), core::slice::from_ref(&inst))[0];
            assert!(greedy <= brute_force(&inst) + 1e-12);
        }
    }

    #[test]
    fn ratio_order_on_hand_instance() {
        let inst = KpInstance {
            values: vec![3.0, 2.0, 4.0],
            weights: vec![3.0, 1.0, 2.0],
            capacity: 3.0,
            reference: None,
        };
        // Ratios 1, 2, 2: tie between items 1 and 2 goes to the lower index.
        assert_eq!(construct_packing(&ratio(), &inst), vec![1, 2]);
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(gen_kp(100, 25.0, 2, 5), gen_kp(100, 25.0, 2, 5));
    }
}
