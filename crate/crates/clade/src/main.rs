use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clade::config::RunConfig;
use clade::dataset::{into_dataset, read_jsonl, to_records, write_jsonl};
use clade::evaluator::TimedEvaluator;
use clade::experiment::{self, parse_for, parse_snapshot, snapshot_to_dot, variants};
use clade_core::dsl::ProblemKind;
use clade_core::problems::{gen_bpp_mixture, gen_bpp_weibull, gen_kp, gen_tsp, AcoConfig, Dataset, Evaluator};
use clade_core::SelectionMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "clade", version, about = "Clade-level Bayesian tree search over priority heuristics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config field, e.g. `--set search.tree.lambda_decay=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=clade::config::MAX_SEED))]
    seed: Option<u64>,
    /// Evaluation budget T.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Clade decay factor.
    #[arg(long)]
    lambda: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    CladeThompson,
    NodeThompson,
    Uct,
}

impl From<PolicyArg> for SelectionMode {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::CladeThompson => SelectionMode::CladeThompson,
            PolicyArg::NodeThompson => SelectionMode::NodeThompson,
            PolicyArg::Uct => SelectionMode::Uct,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceKind {
    Tsp,
    Kp,
    Bpp,
    BppMixture,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeFormat {
    Text,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search and write trace.csv, best.txt and tree.txt.
    Run(RunArgs),
    /// Run several policies or decay factors over several seeds.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Policies to compare.
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["clade-thompson", "uct"])]
        policies: Vec<PolicyArg>,
        /// Decay factors to sweep, crossed with every policy.
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values = ["0", "1", "2"])]
        seeds: Vec<u64>,
    },
    /// Write a JSON-lines instance file.
    GenInstances {
        #[arg(value_enum)]
        kind: InstanceKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        capacity: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score one expression on an instance file.
    Eval {
        /// Expression text.
        #[arg(long)]
        expr: String,
        #[arg(long)]
        dataset: PathBuf,
        /// Treat TSP instances as ACO guidance (the expression is an edge prior).
        #[arg(long)]
        aco: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write per-instance objectives as CSV.
        #[arg(long)]
        per_instance: Option<PathBuf>,
    },
    /// Render a tree.txt snapshot.
    ExportTree {
        tree: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        format: TreeFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(a: &RunArgs) -> Result<RunConfig> {
    let mut overrides = a.overrides.clone();
    if let Some(s) = a.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(b) = a.budget {
        overrides.push(format!("search.policy.budget={b}"));
    }
    if let Some(p) = a.policy {
        overrides.push(format!("search.policy.mode=\"{}\"", SelectionMode::from(p).as_str()));
    }
    if let Some(l) = a.lambda {
        overrides.push(format!("search.tree.lambda_decay={l:?}"));
    }
    if let Some(o) = &a.out {
        overrides.push(format!("output_dir={}", toml::Value::String(o.display().to_string())));
    }
    Ok(match &a.config {
        Some(path) => RunConfig::load(path, &overrides)?,
        None => RunConfig::from_toml_str("", &overrides)?,
    })
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = load_config(a)?;
    let report = experiment::execute(&cfg)?;
    experiment::write_outputs(&cfg.output_dir, &cfg, &report)?;
    report.trace.check_invariants().context("emitted trace violates its invariants")?;
    println!("evaluations: {}", report.trace.rows.len());
    if let Some(b) = report.baseline_raw {
        println!("baseline raw score: {b}");
    }
    if let Some(share) = report.tail_share_a {
        println!("tail share of branch A: {share}");
    }
    if let Some(b) = &report.best {
        println!("best raw score: {} (eval {})", b.raw_score, b.found_at_eval);
        println!("best expr: {}", b.expr);
    }
    println!("outputs: {}", cfg.output_dir.display());
    Ok(())
}

fn cmd_compare(a: &RunArgs, policies: &[PolicyArg], lambdas: &[f64], seeds: &[u64]) -> Result<()> {
    let cfg = load_config(a)?;
    let modes: Vec<SelectionMode> = policies.iter().map(|&p| p.into()).collect();
    let vs = variants(&modes, lambdas);
    let cmp = experiment::run_comparison(&cfg, &vs, seeds, Some(&cfg.output_dir))?;
    println!("{:<32} {:>14} {:>14} {:>12}", "variant", "mean best", "std", "tail A");
    for v in &vs {
        let label = v.label();
        let bests: Vec<f64> = cmp.runs_of(&label).filter_map(|r| r.report.trace.final_best()).collect();
        let shares: Vec<f64> = cmp.runs_of(&label).filter_map(|r| r.report.tail_share_a).collect();
        let (m, s) = mean_std(&bests);
        let share = if shares.is_empty() { "-".to_owned() } else { format!("{:.4}", mean_std(&shares).0) };
        println!("{label:<32} {m:>14.6} {s:>14.6} {share:>12}");
    }
    println!("aggregate: {}", cfg.output_dir.join("aggregate.csv").display());
    Ok(())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 { (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, s)
}

fn cmd_gen(kind: InstanceKind, out: &Path, n: Option<usize>, count: Option<usize>, capacity: Option<f64>, seed: u64) -> Result<()> {
    let ds = match kind {
        InstanceKind::Tsp => Dataset::Tsp(gen_tsp(n.unwrap_or(50), count.unwrap_or(64), seed)),
        InstanceKind::Kp => Dataset::Kp(gen_kp(n.unwrap_or(100), capacity.unwrap_or(25.0), count.unwrap_or(64), seed)),
        InstanceKind::Bpp => {
            let cap = capacity.unwrap_or(100.0);
            if cap < 1.0 || cap.fract() != 0.0 {
                bail!("bin capacity must be a positive integer");
            }
            Dataset::Bpp(gen_bpp_weibull(
                n.unwrap_or(1000),
                cap as u32,
                clade_core::problems::bpp::WEIBULL_SHAPE,
                clade_core::problems::bpp::WEIBULL_SCALE,
                count.unwrap_or(1),
                seed,
            ))
        }
        InstanceKind::BppMixture => Dataset::Bpp(gen_bpp_mixture(seed)),
    };
    if matches!(&ds, Dataset::Tsp(v) if v.first().is_some_and(|t| t.n() < 3)) {
        bail!("TSP instances need at least three nodes");
    }
    write_jsonl(out, &to_records(&ds))?;
    println!("wrote {} {} instances to {}", ds.len(), ds.kind().as_str(), out.display());
    match &ds {
        Dataset::Tsp(v) | Dataset::AcoTsp { instances: v, .. } => println!("nodes per instance: {}", v[0].n()),
        Dataset::Kp(v) => {
            let total: f64 = v.iter().map(|k| k.values.iter().sum::<f64>()).sum();
            println!("items per instance: {}, capacity {}, mean total value {:.4}", v[0].n(), v[0].capacity, total / v.len() as f64);
        }
        Dataset::Bpp(v) => {
            for b in v {
                let mean = b.sizes.iter().map(|&s| f64::from(s)).sum::<f64>() / b.sizes.len() as f64;
                println!(
                    "{}: {} items, capacity {}, mean size {:.3}, lower bound {} bins",
                    b.tag.as_deref().unwrap_or("-"),
                    b.sizes.len(),
                    b.capacity,
                    mean,
                    b.lower_bound()
                );
            }
        }
    }
    Ok(())
}

fn cmd_eval(expr: &str, dataset: &Path, aco: bool, seed: u64, per_instance: Option<&PathBuf>) -> Result<()> {
    let records = read_jsonl(dataset)?;
    let found = clade::dataset::records_kind(&records)?;
    let kind = if aco {
        if found != ProblemKind::Tsp {
            bail!("--aco needs a TSP dataset");
        }
        ProblemKind::AcoTsp
    } else {
        found
    };
    let e = parse_for(kind, expr)?;
    let ds = into_dataset(records, kind, AcoConfig::default(), seed)?;
    let refs = ds.references();
    let ev = TimedEvaluator::new(ds, None);
    let res = ev.evaluate(&e);
    println!("expr: {e}");
    println!("instances: {}", res.per_instance.len());
    println!("raw score: {}", res.raw_score);
    let mean = res.per_instance.iter().sum::<f64>() / res.per_instance.len() as f64;
    println!("mean objective: {mean}");
    let gaps: Vec<f64> = res
        .per_instance
        .iter()
        .zip(&refs)
        .filter_map(|(&obj, r)| r.filter(|&r| r != 0.0).map(|r| (obj - r) / r.abs() * 100.0))
        .collect();
    if !gaps.is_empty() {
        println!("mean gap vs reference: {:.4}% over {} instances", gaps.iter().sum::<f64>() / gaps.len() as f64, gaps.len());
    }
    println!("wall time: {:.3}s", res.wall_time);
    if let Some(path) = per_instance {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["instance", "objective", "reference"])?;
        for (i, (obj, r)) in res.per_instance.iter().zip(&refs).enumerate() {
            w.write_record([i.to_string(), obj.to_string(), r.map_or_else(String::new, |r| r.to_string())])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_export(tree: &Path, format: TreeFormat, out: Option<&PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(tree).with_context(|| format!("reading {}", tree.display()))?;
    let rows = parse_snapshot(&text)?;
    let rendered = match format {
        TreeFormat::Text => text,
        TreeFormat::Dot => snapshot_to_dot(&rows),
    };
    match out {
        Some(p) => std::fs::write(p, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare { run, policies, lambdas, seeds } => cmd_compare(run, policies, lambdas, seeds),
        Command::GenInstances { kind, out, n, count, capacity, seed } => cmd_gen(*kind, out, *n, *count, *capacity, *seed),
        Command::Eval { expr, dataset, aco, seed, per_instance } => cmd_eval(expr, dataset, *aco, *seed, per_instance.as_ref()),
        Command::ExportTree { tree, format, out } => cmd_export(tree, *format, out.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
