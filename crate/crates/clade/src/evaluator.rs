//! Wall-clock accounting and parallel evaluation over a [`Dataset`].

use std::time::{Duration, Instant};

use clade_core::dsl::{Expr, ProblemKind};
use clade_core::problems::{self, aco, Dataset, EvalResult, Evaluator};
use clade_core::rng::{split_seed, Rng};
use rayon::prelude::*;

/// Evaluates instances in parallel and records wall time.
///
/// Per-instance objectives are collected in instance order and reduced
/// sequentially, so scores are bit-identical to a serial evaluation. The
/// timeout only stops ACO colonies early; constructive evaluators always run
/// to completion.
#[derive(Debug, Clone)]
pub struct TimedEvaluator {
    dataset: Dataset,
    timeout: Option<Duration>,
}

impl TimedEvaluator {
    pub fn new(dataset: Dataset, timeout: Option<Duration>) -> Self {
        Self { dataset, timeout }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    fn objectives(&self, expr: &Expr, start: Instant) -> Vec<f64> {
        let expired = || self.timeout.is_some_and(|t| start.elapsed() > t);
        match &self.dataset {
            Dataset::Tsp(v) => v
                .par_iter()
                .map(|inst| problems::eval_tsp_constructive(expr, std::slice::from_ref(inst))[0])
                .collect(),
            Dataset::Kp(v) => v
                .par_iter()
                .map(|inst| problems::eval_kp_constructive(expr, std::slice::from_ref(inst))[0])
                .collect(),
            Dataset::Bpp(v) => v
                .par_iter()
                .map(|inst| problems::eval_bpp_online(expr, std::slice::from_ref(inst))[0])
                .collect(),
            Dataset::AcoTsp { instances, config, seed } => instances
                .par_iter()
                .enumerate()
                .map(|(k, inst)| {
                    let mut rng = Rng::seed_from_u64(split_seed(*seed, k as u64));
                    aco::aco_solve_tsp(expr, inst, config, &mut rng, &mut || expired())
                })
                .collect(),
        }
    }
}

impl Evaluator for TimedEvaluator {
    fn kind(&self) -> ProblemKind {
        self.dataset.kind()
    }

    fn evaluate(&self, expr: &Expr) -> EvalResult {
        let start = Instant::now();
        let per_instance = self.objectives(expr, start);
        EvalResult {
            raw_score: self.dataset.raw_score(&per_instance),
            per_instance,
            wall_time: start.elapsed().as_secs_f64(),
        }
    }

    fn evaluate_batch(&self, exprs: &[&Expr]) -> Vec<EvalResult> {
        exprs.par_iter().map(|e| self.evaluate(e)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clade_core::dsl::parse;
    use clade_core::problems::{gen_bpp_mixture, gen_kp, gen_tsp, AcoConfig};

    #[test]
    fn matches_serial_evaluation_bit_for_bit() {
        let sets = [
            (Dataset::Tsp(gen_tsp(20, 8, 1)), "neg(dist_to_cand)"),
            (Dataset::Kp(gen_kp(30, 5.0, 8, 2)), "div_p(value, weight)"),
            (Dataset::Bpp(gen_bpp_mixture(3)), "neg(sub(bin_residual, item_size))"),
            (
                Dataset::AcoTsp {
                    instances: gen_tsp(10, 4, 3),
                    config: AcoConfig { iterations: 5, ..AcoConfig::default() },
                    seed: 9,
                },
                "div_p(1, d_ij)",
            ),
        ];
        for (ds, text) in sets {
            let e = parse(text, ds.kind().schema()).unwrap();
            let serial = ds.evaluate(&e);
            let timed = TimedEvaluator::new(ds, None).evaluate(&e);
            assert_eq!(serial.per_instance, timed.per_instance);
            assert_eq!(serial.raw_score.to_bits(), timed.raw_score.to_bits());
            assert!(timed.wall_time >= 0.0);
        }
    }

    #[test]
    fn zero_timeout_cuts_colonies_short() {
        let ds = Dataset::AcoTsp { instances: gen_tsp(30, 2, 4), config: AcoConfig::default(), seed: 1 };
        let e = parse("div_p(1, d_ij)", ds.kind().schema()).unwrap();
        let full = ds.evaluate(&e).raw_score;
        let cut = TimedEvaluator::new(ds, Some(Duration::ZERO)).evaluate(&e).raw_score;
        assert!(cut.is_finite());
        assert!(cut <= full);
    }
}
