//! Constructive TSP.

use alloc::vec;
use alloc::vec::Vec;

use crate::dsl::Expr;
use crate::rng::Rng;

/// Tours start and close at this node; it is also the `destination` feature.
pub const START: usize = 0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "TspRecord", into = "TspRecord"))]
pub struct TspInstance {
    pub coords: Vec<(f64, f64)>,
    /// Row-major `n x n` Euclidean distances.
    dist: Vec<f64>,
    /// Reference tour length (optimal or best known), when available.
    pub reference: Option<f64>,
}

/// Serialized form: the distance matrix is derived on load.
#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct TspRecord {
    coords: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<f64>,
}

#[cfg(feature = "serde")]
impl From<TspRecord> for TspInstance {
    fn from(r: TspRecord) -> Self {
        Self { reference: r.reference, ..Self::from_coords(r.coords) }
    }
}

#[cfg(feature = "serde")]
impl From<TspInstance> for TspRecord {
    fn from(t: TspInstance) -> Self {
        Self { coords: t.coords, reference: t.reference }
    }
}

impl TspInstance {
    pub fn from_coords(coords: Vec<(f64, f64)>) -> Self {
        let n = coords.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = libm::hypot(coords[i].0 - coords[j].0, coords[i].1 - coords[j].1);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self { coords, dist, reference: None }
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n() + j]
    }
}

/// `count` instances of `n` points uniform in the unit square.
pub fn gen_tsp(n: usize, count: usize, seed: u64) -> Vec<TspInstance> {
    assert!(n >= 3, "a TSP instance needs at least three nodes");
    let mut rng = Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let coords = (0..n).map(|_| (rng.uniform(), rng.uniform())).collect();
            TspInstance::from_coords(coords)
        })
        .collect()
}

/// Feature vector in `TSP_SCHEMA` order. `unvisited` must contain `candidate`.
pub fn tsp_features(
    inst: &TspInstance,
    current: usize,
    candidate: usize,
    destination: usize,
    unvisited: &[usize],
) -> [f64; 5] {
    debug_assert!(unvisited.contains(&candidate));
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let mut others = 0usize;
    for &u in unvisited {
        if u != candidate {
            let d = inst.dist(candidate, u);
            sum += d;
            min = min.min(d);
            others += 1;
        }
    }
    let (mean, min) = if others == 0 { (0.0, 0.0) } else { (sum / others as f64, min) };
    [
        inst.dist(current, candidate),
        inst.dist(candidate, destination),
        mean,
        min,
        unvisited.len() as f64 / inst.n() as f64,
    ]
}

/// Greedy tour: from `START`, repeatedly move to the highest-priority
/// unvisited node, ties to the lowest index.
pub fn construct_tour(expr: &Expr, inst: &TspInstance) -> Vec<usize> {
    let n = inst.n();
    let mut tour = Vec::with_capacity(n);
    tour.push(START);
    let mut unvisited: Vec<usize> = (0..n).filter(|&i| i != START).collect();
    let mut current = START;
    while !unvisited.is_empty() {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (k, &cand) in unvisited.iter().enumerate() {
            let f = tsp_features(inst, current, cand, START, &unvisited);
            let score = expr.evaluate(&f).expect("expression validated against the TSP schema");
            if score > best.1 {
                best = (k, score);
            }
        }
        // `unvisited` stays sorted so position order is index order.
        current = unvisited.remove(best.0);
        tour.push(current);
    }
    tour
}

/// Closed tour length.
pub fn tour_length(inst: &TspInstance, tour: &[usize]) -> f64 {
    let n = tour.len();
    (0..n).map(|k| inst.dist(tour[k], tour[(k + 1) % n])).sum()
}

pub fn is_permutation(tour: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    tour.len() == n && tour.iter().all(|&i| i < n && !core::mem::replace(&mut seen[i], true))
}

/// Direct nearest-neighbour construction from `START`, ties to the lowest index.
pub fn nearest_neighbor_tour(inst: &TspInstance) -> Vec<usize> {
    let n = inst.n();
    let mut visited = vec![false; n];
    let mut tour = vec![START];
    visited[START] = true;
    let mut current = START;
    for _ in 1..n {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..n {
            if !visited[j] && inst.dist(current, j) < best.1 {
                best = (j, inst.dist(current, j));
            }
        }
        visited[best.0] = true;
        tour.push(best.0);
        current = best.0;
    }
    tour
}

/// Per-instance tour lengths of the constructive heuristic.
pub fn eval_tsp_constructive(expr: &Expr, instances: &[TspInstance]) -> Vec<f64> {
    instances
        .iter()
        .map(|inst| {
            let tour = construct_tour(expr, inst);
            debug_assert!(is_permutation(&tour, inst.n()));
            tour_length(inst, &tour)
        })
        .collect()
}
