//! Online bin packing.

use alloc::vec::Vec;

use rand_distr::{Distribution, Weibull};

use crate::dsl::Expr;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BppInstance {
    /// Item sizes in arrival order.
    pub sizes: Vec<u32>,
    pub capacity: u32,
    /// Sub-set label inside a mixture dataset.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub tag: Option<alloc::string::String>,
}

impl BppInstance {
    /// Volume bound `ceil(sum / capacity)`.
    pub fn lower_bound(&self) -> u64 {
        let total: u64 = self.sizes.iter().map(|&s| u64::from(s)).sum();
        total.div_ceil(u64::from(self.capacity))
    }
}

pub const WEIBULL_SHAPE: f64 = 3.0;
pub const WEIBULL_SCALE: f64 = 45.0;

/// Sizes are `ceil(min(sample, capacity))` with `sample ~ Weibull(shape, scale)`,
/// clamped to `[1, capacity]`.
pub fn gen_bpp_weibull(
    n_items: usize,
    capacity: u32,
    shape: f64,
    scale: f64,
    count: usize,
    seed: u64,
) -> Vec<BppInstance> {
    assert!(capacity >= 1, "bin capacity must be positive");
    let dist = Weibull::new(scale, shape).expect("shape and scale must be positive");
    let mut rng = Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let sizes = (0..n_items)
                .map(|_| {
                    let x: f64 = dist.sample(rng.inner());
                    let s = libm::ceil(x.min(f64::from(capacity)));
                    (s as u32).clamp(1, capacity)
                })
                .collect();
            BppInstance { sizes, capacity, tag: None }
        })
        .collect()
}

/// The four-set mixture: short and long streams against small and large bins.
pub fn gen_bpp_mixture(seed: u64) -> Vec<BppInstance> {
    let mut out = Vec::new();
    for (k, (n, cap)) in [(1000, 100), (5000, 100), (1000, 500), (5000, 500)].into_iter().enumerate() {
        let mut set = gen_bpp_weibull(n, cap, WEIBULL_SHAPE, WEIBULL_SCALE, 1, crate::rng::split_seed(seed, k as u64));
        for inst in &mut set {
            inst.tag = Some(alloc::format!("weibull_{}k_c{}", n / 1000, cap));
        }
        out.extend(set);
    }
    out
}

/// Places each item into the highest-priority bin with room, or a new bin.
///
/// The new-bin option is a virtual bin with residual `capacity`, scored
/// after all open bins so ties go to the oldest open bin. Returns the final
/// residuals of the bins used.
pub fn pack_online(expr: &Expr, inst: &BppInstance) -> Vec<u32> {
    let cap = inst.capacity;
    let mut residuals: Vec<u32> = Vec::new();
    for (seen, &size) in inst.sizes.iter().enumerate() {
        let frac_open = residuals.len() as f64 / (seen + 1) as f64;
        let score_of = |residual: u32| {
            expr.evaluate(&[f64::from(size), f64::from(residual), frac_open])
                .expect("expression validated against the BPP schema")
        };
        let mut best: Option<(usize, f64)> = None;
        for (b, &r) in residuals.iter().enumerate() {
            if r >= size {
                let s = score_of(r);
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((b, s));
                }
            }
        }
        let virtual_score = score_of(cap);
        match best {
            Some((b, s)) if s >= virtual_score => residuals[b] -= size,
            _ => residuals.push(cap - size),
        }
    }
    residuals
}

/// Per-instance gap to the lower bound, in percent.
pub fn eval_bpp_online(expr: &Expr, instances: &[BppInstance]) -> Vec<f64> {
    instances
        .iter()
        .map(|inst| {
            let bins = pack_online(expr, inst).len() as f64;
            let lb = inst.lower_bound() as f64;
            debug_assert!(bins >= lb);
            100.0 * (bins - lb) / lb
        })
        .collect()
}
