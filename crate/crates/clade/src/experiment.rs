//! Runs, comparisons and their on-disk artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clade_core::dsl::{parse, Expr, ProblemKind};
use clade_core::generator::{Generator, MockGenerator};
use clade_core::problems::{self, gen_bpp_mixture, gen_bpp_weibull, gen_kp, gen_tsp, Dataset, Evaluator};
use clade_core::synthetic::{run_deep_payoff, Branch};
use clade_core::{run_search_with, BestHeuristic, RunTrace, SeedSet, SelectionMode};

use crate::config::{Backend, RunConfig, Task};
use crate::dataset::{into_dataset, read_jsonl};
use crate::evaluator::TimedEvaluator;
use crate::llm::LlmGenerator;
use crate::trace::{aggregate, write_aggregate, write_trace, AggregateRow};

/// The instances a run evaluates on, generated from `seeds.instances` or
/// loaded from `problem.dataset`. ACO colonies draw from `seeds.evaluation`.
pub fn build_dataset(cfg: &RunConfig, seeds: &SeedSet) -> Result<Dataset> {
    let p = &cfg.problem;
    let kind = p.kind.problem_kind().context("the synthetic task has no dataset")?;
    if let Some(path) = &p.dataset {
        let records = read_jsonl(path)?;
        return Ok(into_dataset(records, kind, p.aco, seeds.evaluation)?);
    }
    let (n, count, seed) = (p.n(), p.count(), seeds.instances);
    Ok(match kind {
        ProblemKind::Tsp => Dataset::Tsp(gen_tsp(n, count, seed)),
        ProblemKind::AcoTsp => Dataset::AcoTsp { instances: gen_tsp(n, count, seed), config: p.aco, seed: seeds.evaluation },
        ProblemKind::Kp => Dataset::Kp(gen_kp(n, p.capacity(), count, seed)),
        ProblemKind::Bpp if p.mixture => Dataset::Bpp(gen_bpp_mixture(seed)),
        ProblemKind::Bpp => {
            let cap = p.capacity();
            if cap < 1.0 || cap.fract() != 0.0 || cap > f64::from(u32::MAX) {
                bail!("bin capacity must be a positive integer, got {cap}");
            }
            Dataset::Bpp(gen_bpp_weibull(n, cap as u32, p.weibull_shape, p.weibull_scale, count, seed))
        }
    })
}

fn make_generator(cfg: &RunConfig) -> Result<Box<dyn Generator>> {
    Ok(match cfg.generator.backend {
        Backend::Mock => Box::new(MockGenerator),
        Backend::Llm => Box::new(LlmGenerator::from_env(cfg.generator.llm.clone())?),
    })
}

/// Everything a single run produces.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub trace: RunTrace,
    pub best: Option<BestHeuristic>,
    /// Raw score of the hand-written baseline heuristic on the same dataset.
    pub baseline_raw: Option<f64>,
    /// Synthetic task only: share of the final selections that entered branch A.
    pub tail_share_a: Option<f64>,
    /// Contents of `tree.txt`.
    pub tree_text: String,
    pub exhausted: bool,
}

impl RunReport {
    /// Contents of `best.txt`.
    pub fn best_text(&self) -> String {
        match &self.best {
            Some(b) => format!(
                "expr: {}\ndescription: {}\nraw_score: {}\nfound_at_eval: {}\nnode: {}\n",
                b.expr, b.description, b.raw_score, b.found_at_eval, b.node
            ),
            None => match (self.tail_share_a, self.trace.final_best()) {
                (Some(share), best) => format!(
                    "best_payoff: {}\ntail_share_a: {share}\n",
                    best.map_or_else(|| "-".to_owned(), |b| b.to_string())
                ),
                (None, _) => "no heuristic was evaluated successfully\n".to_owned(),
            },
        }
    }
}

/// Runs `cfg` once, on `dataset` if given (heuristic tasks only).
pub fn execute_on(cfg: &RunConfig, dataset: Option<Dataset>) -> Result<RunReport> {
    let seeds = SeedSet::from_master(cfg.seed);
    if cfg.problem.kind == Task::DeepPayoff {
        let run = run_deep_payoff(&cfg.deep_payoff(), &seeds)?;
        return Ok(RunReport {
            tail_share_a: Some(run.tail_share_a()),
            tree_text: run.tree.snapshot_text(|b| match b {
                Branch::A => "A".to_owned(),
                Branch::B => "B".to_owned(),
            }),
            trace: run.trace,
            best: None,
            baseline_raw: None,
            exhausted: false,
        });
    }
    let dataset = match dataset {
        Some(d) => d,
        None => build_dataset(cfg, &seeds)?,
    };
    let kind = dataset.kind();
    let timeout = Duration::from_secs_f64(cfg.problem.eval_timeout_secs);
    let evaluator = TimedEvaluator::new(dataset, Some(timeout));
    let baseline = parse(problems::baseline_text(kind), kind.schema()).expect("baseline heuristics parse");
    let baseline_raw = evaluator.evaluate(&baseline).raw_score;
    let mut generator = make_generator(cfg)?;
    let out = run_search_with(&cfg.search, &evaluator, generator.as_mut(), &seeds, &mut |row| {
        log::debug!("eval {} node {} raw {:?} best {:?}", row.eval_index, row.node_id, row.raw_score, row.global_best_raw);
    })?;
    if out.exhausted {
        log::warn!("every root clade froze after {} evaluations", out.evaluations());
    }
    Ok(RunReport {
        tree_text: out.tree.snapshot_text(|c| c.expr.to_string()),
        trace: out.trace,
        best: out.best,
        baseline_raw: Some(baseline_raw),
        tail_share_a: None,
        exhausted: out.exhausted,
    })
}

pub fn execute(cfg: &RunConfig) -> Result<RunReport> {
    execute_on(cfg, None)
}

/// Writes `trace.csv`, `best.txt`, `tree.txt` and the resolved `config.toml`.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let trace_path = dir.join("trace.csv");
    let f = fs::File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?;
    write_trace(f, &report.trace)?;
    fs::write(dir.join("best.txt"), report.best_text())?;
    fs::write(dir.join("tree.txt"), &report.tree_text)?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    Ok(())
}

/// One arm of a comparison: a policy and optionally a decay factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub mode: SelectionMode,
    pub lambda: Option<f64>,
}

impl Variant {
    pub fn label(&self) -> String {
        match self.lambda {
            Some(l) => format!("{}_lambda{l}", self.mode.as_str()),
            None => self.mode.as_str().to_owned(),
        }
    }

    fn apply(&self, cfg: &mut RunConfig) {
        cfg.search.policy.mode = self.mode;
        if let Some(l) = self.lambda {
            cfg.search.tree.lambda_decay = l;
        }
    }
}

/// Every policy crossed with every decay factor; no decay list keeps the
/// configured one.
pub fn variants(modes: &[SelectionMode], lambdas: &[f64]) -> Vec<Variant> {
    let lambdas: Vec<Option<f64>> = if lambdas.is_empty() { vec![None] } else { lambdas.iter().copied().map(Some).collect() };
    modes.iter().flat_map(|&mode| lambdas.iter().map(move |&lambda| Variant { mode, lambda })).collect()
}

#[derive(Debug, Clone)]
pub struct ComparisonRun {
    pub variant: Variant,
    pub seed: u64,
    pub report: RunReport,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub runs: Vec<ComparisonRun>,
    pub aggregate: Vec<AggregateRow>,
}

impl Comparison {
    pub fn runs_of<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a ComparisonRun> + 'a {
        self.runs.iter().filter(move |r| r.variant.label() == label)
    }
}

/// Runs every (variant, seed) pair. All variants under one seed evaluate on
/// the same dataset and share that seed's streams, so they differ only by
/// policy. With `out` set, each run lands in `out/<label>/seed<s>/` and the
/// aggregate in `out/aggregate.csv`.
pub fn run_comparison(base: &RunConfig, variants: &[Variant], seeds: &[u64], out: Option<&Path>) -> Result<Comparison> {
    if variants.is_empty() || seeds.is_empty() {
        bail!("a comparison needs at least one policy and one seed");
    }
    let mut runs = Vec::new();
    for &seed in seeds {
        let mut seeded = base.clone();
        seeded.seed = seed;
        let shared = match base.problem.kind {
            Task::DeepPayoff => None,
            _ => Some(build_dataset(&seeded, &SeedSet::from_master(seed))?),
        };
        for v in variants {
            let mut cfg = seeded.clone();
            v.apply(&mut cfg);
            cfg.validate()?;
            log::info!("running {} seed {seed}", v.label());
            let report = execute_on(&cfg, shared.clone())?;
            if let Some(dir) = out {
                let run_dir: PathBuf = dir.join(v.label()).join(format!("seed{seed}"));
                write_outputs(&run_dir, &cfg, &report)?;
            }
            runs.push(ComparisonRun { variant: v.clone(), seed, report });
        }
    }
    let mut agg = Vec::new();
    for v in variants {
        let label = v.label();
        let traces: Vec<&RunTrace> = runs.iter().filter(|r| r.variant == *v).map(|r| &r.report.trace).collect();
        agg.extend(aggregate(&label, &traces));
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_aggregate(fs::File::create(dir.join("aggregate.csv"))?, &agg)?;
    }
    Ok(Comparison { runs, aggregate: agg })
}

/// One row of a `tree.txt` snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: u32,
    pub local: (f64, f64),
    pub clade: (f64, f64),
    pub frozen: bool,
    pub expr: Option<String>,
}

pub fn parse_snapshot(text: &str) -> Result<Vec<SnapshotRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let ctx = || format!("tree snapshot line {}", i + 1);
        let cols: Vec<&str> = line.splitn(9, '\t').collect();
        if cols.len() != 9 {
            bail!("{}: expected 9 tab-separated columns, found {}", ctx(), cols.len());
        }
        let num = |s: &str| s.parse::<f64>().with_context(ctx);
        rows.push(SnapshotRow {
            id: cols[0].parse().with_context(ctx)?,
            parent: if cols[1] == "-" { None } else { Some(cols[1].parse().with_context(ctx)?) },
            depth: cols[2].parse().with_context(ctx)?,
            local: (num(cols[3])?, num(cols[4])?),
            clade: (num(cols[5])?, num(cols[6])?),
            frozen: match cols[7] {
                "0" => false,
                "1" => true,
                other => bail!("{}: frozen flag `{other}`", ctx()),
            },
            expr: if cols[8] == "-" { None } else { Some(cols[8].to_owned()) },
        });
    }
    Ok(rows)
}

/// Graphviz rendering; frozen nodes are grey, labels show the clade mean.
pub fn snapshot_to_dot(rows: &[SnapshotRow]) -> String {
    let mut out = String::from("digraph clade_tree {\n  node [shape=box, fontname=monospace];\n");
    for r in rows {
        let (a, b) = r.clade;
        let mut label = format!("#{} mean {:.3} mass {:.2}", r.id, a / (a + b), a + b);
        if let Some(e) = &r.expr {
            label.push_str("\\n");
            label.push_str(&e.replace('\\', "\\\\").replace('"', "\\\""));
        }
        let style = if r.frozen { ", style=filled, fillcolor=grey80" } else { "" };
        out.push_str(&format!("  n{} [label=\"{label}\"{style}];\n", r.id));
    }
    for r in rows {
        if let Some(p) = r.parent {
            out.push_str(&format!("  n{p} -> n{};\n", r.id));
        }
    }
    out.push_str("}\n");
    out
}

/// Parses `text` for `kind`; the error message carries the parser's diagnostics.
pub fn parse_for(kind: ProblemKind, text: &str) -> Result<Expr> {
    parse(text, kind.schema()).map_err(|e| anyhow::anyhow!("cannot parse `{text}`: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: Task) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.problem.kind = kind;
        cfg.problem.n = Some(12);
        cfg.problem.count = Some(4);
        cfg.search.policy.budget = 12;
        cfg
    }

    #[test]
    fn comparison_shares_datasets_and_aggregates_every_variant() {
        let cfg = small(Task::Tsp);
        let vs = variants(&[SelectionMode::CladeThompson, SelectionMode::Uct], &[]);
        let cmp = run_comparison(&cfg, &vs, &[1, 2], None).unwrap();
        assert_eq!(cmp.runs.len(), 4);
        for seed in [1, 2] {
            let base: Vec<_> = cmp.runs.iter().filter(|r| r.seed == seed).map(|r| r.report.baseline_raw).collect();
            assert!(base.windows(2).all(|w| w[0] == w[1]));
        }
        let groups: std::collections::BTreeSet<_> = cmp.aggregate.iter().map(|r| r.group.clone()).collect();
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn variant_labels() {
        let vs = variants(&[SelectionMode::CladeThompson], &[0.0, 0.5]);
        let labels: Vec<_> = vs.iter().map(Variant::label).collect();
        assert_eq!(labels, ["clade_thompson_lambda0", "clade_thompson_lambda0.5"]);
    }

    #[test]
    fn snapshot_round_trips_through_parser() {
        let report = execute(&small(Task::Kp)).unwrap();
        let rows = parse_snapshot(&report.tree_text).unwrap();
        assert_eq!(rows.len(), report.trace.rows.len() + 1);
        assert_eq!(rows[0].parent, None);
        let dot = snapshot_to_dot(&rows);
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("->").count(), rows.len() - 1);
    }

    #[test]
    fn weibull_capacity_must_be_integral() {
        let mut cfg = small(Task::Bpp);
        cfg.problem.mixture = false;
        cfg.problem.capacity = Some(10.5);
        assert!(build_dataset(&cfg, &SeedSet::from_master(0)).is_err());
    }
}
