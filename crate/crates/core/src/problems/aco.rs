//! Ant System for TSP guided by a learned heuristic matrix.

use alloc::vec;
use alloc::vec::Vec;

use super::tsp::{tour_length, TspInstance};
use crate::dsl::Expr;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AcoConfig {
    pub ants: usize,
    pub iterations: usize,
    /// Pheromone exponent.
    pub alpha: f64,
    /// Heuristic exponent.
    pub beta: f64,
    /// Evaporation rate.
    pub rho: f64,
    pub tau_init: f64,
    /// Deposit numerator: each best-of-iteration edge gains `q / length`.
    pub q: f64,
}

impl Default for AcoConfig {
    fn default() -> Self {
        Self { ants: 10, iterations: 50, alpha: 1.0, beta: 2.0, rho: 0.1, tau_init: 1.0, q: 1.0 }
    }
}

/// Per-edge features in `ACO_TSP_SCHEMA` order: `d_ij`, and the mean and
/// minimum distance from `j` to the other nodes.
pub fn edge_features(inst: &TspInstance) -> Vec<[f64; 3]> {
    let n = inst.n();
    let stats: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let others = (0..n).filter(|&k| k != j).map(|k| inst.dist(j, k));
            let (sum, min) = others.fold((0.0, f64::INFINITY), |(s, m), d| (s + d, m.min(d)));
            (sum / (n - 1) as f64, min)
        })
        .collect();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push([inst.dist(i, j), stats[j].0, stats[j].1]);
        }
    }
    out
}

/// Heuristic matrix `eta` (row-major), shifted to be strictly positive.
/// Diagonal entries are unused and left at zero.
pub fn heuristic_matrix(expr: &Expr, inst: &TspInstance) -> Vec<f64> {
    let n = inst.n();
    let feats = edge_features(inst);
    let mut eta = vec![0.0; n * n];
    let mut min = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = expr.evaluate(&feats[i * n + j]).expect("expression validated against the ACO schema");
                eta[i * n + j] = v;
                min = min.min(v);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                eta[i * n + j] = (eta[i * n + j] - min + 1e-6).max(1e-6);
            }
        }
    }
    eta
}

/// Best tour length found by Ant System.
///
/// `abort` is polled before every iteration after the first; when it returns
/// true the best tour so far is reported.
pub fn aco_solve_tsp(
    expr: &Expr,
    inst: &TspInstance,
    cfg: &AcoConfig,
    rng: &mut Rng,
    abort: &mut dyn FnMut() -> bool,
) -> f64 {
    let n = inst.n();
    let eta = heuristic_matrix(expr, inst);
    let eta_pow: Vec<f64> = eta.iter().map(|&e| libm::pow(e, cfg.beta)).collect();
    let mut tau = vec![cfg.tau_init; n * n];
    let mut weight = vec![0.0; n * n];
    let mut best = f64::INFINITY;
    let mut tour = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for it in 0..cfg.iterations.max(1) {
        if it > 0 && abort() {
            break;
        }
        for k in 0..n * n {
            weight[k] = libm::pow(tau[k], cfg.alpha) * eta_pow[k];
        }
        let mut iter_best: Option<(f64, Vec<usize>)> = None;
        for _ in 0..cfg.ants.max(1) {
            visited.fill(false);
            tour.clear();
            let mut cur = rng.below(n);
            tour.push(cur);
            visited[cur] = true;
            for _ in 1..n {
                let row = &weight[cur * n..(cur + 1) * n];
                let total: f64 = (0..n).filter(|&j| !visited[j]).map(|j| row[j]).sum();
                let mut u = rng.uniform() * total;
                let mut next = usize::MAX;
                for j in 0..n {
                    if !visited[j] {
                        next = j;
                        u -= row[j];
                        if u < 0.0 {
                            break;
                        }
                    }
                }
                visited[next] = true;
                tour.push(next);
                cur = next;
            }
            let len = tour_length(inst, &tour);
            if iter_best.as_ref().is_none_or(|(l, _)| len < *l) {
                iter_best = Some((len, tour.clone()));
            }
        }
        let (len, path) = iter_best.expect("at least one ant");
        best = best.min(len);
        for t in tau.iter_mut() {
            *t *= 1.0 - cfg.rho;
        }
        let deposit = cfg.q / len;
        for k in 0..n {
            let (a, b) = (path[k], path[(k + 1) % n]);
            tau[a * n + b] += deposit;
            tau[b * n + a] += deposit;
        }
    }
    best
}

/// Per-instance best tour lengths, instance `k` using stream `split_seed(seed, k)`.
pub fn eval_aco_tsp(
    expr: &Expr,
    instances: &[TspInstance],
    cfg: &AcoConfig,
    seed: u64,
    abort: &mut dyn FnMut() -> bool,
) -> Vec<f64> {
    instances
        .iter()
        .enumerate()
        .map(|(k, inst)| {
            let mut rng = Rng::seed_from_u64(crate::rng::split_seed(seed, k as u64));
            aco_solve_tsp(expr, inst, cfg, &mut rng, abort)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, ACO_TSP_SCHEMA};
    use crate::problems::tsp::{gen_tsp, nearest_neighbor_tour};

    fn never() -> impl FnMut() -> bool {
        || false
    }

    #[test]
    fn triangle_returns_perimeter() {
        let inst = TspInstance::from_coords(vec![(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)]);
        let e = parse("div_p(1, d_ij)", &ACO_TSP_SCHEMA).unwrap();
        let len = aco_solve_tsp(&e, &inst, &AcoConfig::default(), &mut Rng::seed_from_u64(1), &mut never());
        assert!((len - 12.0).abs() < 1e-12);
    }

    #[test]
    fn eta_is_strictly_positive() {
        let inst = &gen_tsp(8, 1, 3)[0];
        for text in ["neg(d_ij)", "0.0", "div_p(1, d_ij)", "sub(d_j_min, d_j_mean)"] {
            let eta = heuristic_matrix(&parse(text, &ACO_TSP_SCHEMA).unwrap(), inst);
            for i in 0..8 {
                for j in 0..8 {
                    assert!(i == j || eta[i * 8 + j] >= 1e-6);
                }
            }
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let inst = &gen_tsp(15, 1, 4)[0];
        let e = parse("div_p(1, d_ij)", &ACO_TSP_SCHEMA).unwrap();
        let cfg = AcoConfig { iterations: 10, ..AcoConfig::default() };
        let a = aco_solve_tsp(&e, inst, &cfg, &mut Rng::seed_from_u64(8), &mut never());
        let b = aco_solve_tsp(&e, inst, &cfg, &mut Rng::seed_from_u64(8), &mut never());
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn zero_beta_ignores_the_heuristic() {
        let inst = &gen_tsp(12, 1, 5)[0];
        let cfg = AcoConfig { beta: 0.0, iterations: 10, ..AcoConfig::default() };
        let a = parse("div_p(1, d_ij)", &ACO_TSP_SCHEMA).unwrap();
        let b = parse("neg(d_j_mean)", &ACO_TSP_SCHEMA).unwrap();
        let la = aco_solve_tsp(&a, inst, &cfg, &mut Rng::seed_from_u64(2), &mut never());
        let lb = aco_solve_tsp(&b, inst, &cfg, &mut Rng::seed_from_u64(2), &mut never());
        assert_eq!(la.to_bits(), lb.to_bits());
    }

    #[test]
    fn abort_stops_after_first_iteration() {
        let inst = &gen_tsp(10, 1, 6)[0];
        let e = parse("div_p(1, d_ij)", &ACO_TSP_SCHEMA).unwrap();
        let mut polls = 0;
        let len = aco_solve_tsp(&e, inst, &AcoConfig::default(), &mut Rng::seed_from_u64(3), &mut || {
            polls += 1;
            true
        });
        assert_eq!(polls, 1);
        assert!(len.is_finite());
    }

    #[test]
    fn inverse_distance_beats_nearest_neighbor_usually() {
        let e = parse("div_p(1, d_ij)", &ACO_TSP_SCHEMA).unwrap();
        let cfg = AcoConfig::default();
        let mut wins = 0;
        for (k, inst) in gen_tsp(20, 20, 7).iter().enumerate() {
            let nn = tour_length(inst, &nearest_neighbor_tour(inst));
            let aco = aco_solve_tsp(&e, inst, &cfg, &mut Rng::seed_from_u64(k as u64), &mut never());
            wins += usize::from(aco <= nn + 1e-12);
        }
        assert!(wins >= 16, "won {wins} of 20");
    }
}
