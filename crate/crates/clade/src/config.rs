//! Run configuration: a TOML document mirroring [`RunConfig`], plus
//! `key.path=value` overrides.

use std::path::{Path, PathBuf};

use clade_core::dsl::ProblemKind;
use clade_core::engine::SearchConfig;
use clade_core::problems::AcoConfig;
use clade_core::synthetic::DeepPayoffConfig;
use serde::{Deserialize, Serialize};

use crate::llm::LlmConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("override `{0}` is not of the form key.path=value")]
    Override(String),
    #[error("override `{0}` descends into a non-table value")]
    OverridePath(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Largest seed a config file can hold: TOML integers are signed 64-bit.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// What a run optimizes: a heuristic problem or the synthetic tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Tsp,
    Kp,
    Bpp,
    AcoTsp,
    DeepPayoff,
}

impl Task {
    pub fn problem_kind(self) -> Option<ProblemKind> {
        match self {
            Task::Tsp => Some(ProblemKind::Tsp),
            Task::Kp => Some(ProblemKind::Kp),
            Task::Bpp => Some(ProblemKind::Bpp),
            Task::AcoTsp => Some(ProblemKind::AcoTsp),
            Task::DeepPayoff => None,
        }
    }
}

/// Branch payoffs of the synthetic task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub shallow_payoff: f64,
    pub deep_payoff: f64,
    pub other_payoff: f64,
    pub tail: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let d = DeepPayoffConfig::default();
        Self { shallow_payoff: d.shallow_payoff, deep_payoff: d.deep_payoff, other_payoff: d.other_payoff, tail: d.tail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: Task,
    /// Nodes (TSP) or items (KP, BPP without mixture).
    pub n: Option<usize>,
    /// Number of instances.
    pub count: Option<usize>,
    /// Knapsack or bin capacity.
    pub capacity: Option<f64>,
    /// BPP: use the four-set Weibull mixture instead of `n`/`capacity`.
    pub mixture: bool,
    pub weibull_shape: f64,
    pub weibull_scale: f64,
    /// Load instances from a JSON-lines file instead of generating them.
    pub dataset: Option<PathBuf>,
    /// Wall-clock limit per heuristic evaluation (ACO only).
    pub eval_timeout_secs: f64,
    pub aco: AcoConfig,
    pub synthetic: SyntheticConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            kind: Task::Tsp,
            n: None,
            count: None,
            capacity: None,
            mixture: true,
            weibull_shape: clade_core::problems::bpp::WEIBULL_SHAPE,
            weibull_scale: clade_core::problems::bpp::WEIBULL_SCALE,
            dataset: None,
            eval_timeout_secs: 60.0,
            aco: AcoConfig::default(),
            synthetic: SyntheticConfig::default(),
        }
    }
}

impl ProblemConfig {
    pub fn n(&self) -> usize {
        self.n.unwrap_or(match self.kind {
            Task::Kp => 100,
            Task::Bpp => 1000,
            _ => 50,
        })
    }

    pub fn count(&self) -> usize {
        self.count.unwrap_or(match self.kind {
            Task::Bpp => 1,
            _ => 64,
        })
    }

    pub fn capacity(&self) -> f64 {
        self.capacity.unwrap_or(match self.kind {
            Task::Bpp => 100.0,
            _ => 25.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Mock,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub backend: Backend,
    pub llm: LlmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub problem: ProblemConfig,
    pub search: SearchConfig,
    pub generator: GeneratorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            problem: ProblemConfig::default(),
            search: SearchConfig::default(),
            generator: GeneratorConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses TOML text, applying `key.path=value` overrides first.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse()?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_toml_str(&text, overrides)
    }

    /// Fails only for values TOML cannot hold, such as seeds above `i64::MAX`.
    pub fn to_toml_string(&self) -> Result<String, toml::ser::Error> {
        toml::to_string_pretty(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seed > MAX_SEED {
            return Err(ConfigError::Invalid(format!("seed must be <= {MAX_SEED}")));
        }
        self.search.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.generator.llm.validate().map_err(ConfigError::Invalid)?;
        let p = &self.problem;
        if matches!(p.kind, Task::Tsp | Task::AcoTsp) && p.dataset.is_none() && p.n() < 3 {
            return Err(ConfigError::Invalid("TSP needs n >= 3".into()));
        }
        if !(p.eval_timeout_secs > 0.0) {
            return Err(ConfigError::Invalid("eval_timeout_secs must be > 0".into()));
        }
        if !(p.capacity() >= 0.0) {
            return Err(ConfigError::Invalid("capacity must be >= 0".into()));
        }
        if p.kind == Task::Bpp && !p.mixture && !(p.weibull_shape > 0.0 && p.weibull_scale > 0.0) {
            return Err(ConfigError::Invalid("Weibull shape and scale must be > 0".into()));
        }
        Ok(())
    }

    /// Synthetic-task settings assembled from the search section.
    pub fn deep_payoff(&self) -> DeepPayoffConfig {
        let s = &self.problem.synthetic;
        DeepPayoffConfig {
            budget: self.search.policy.budget,
            lambda_decay: self.search.tree.lambda_decay,
            omega_cool: self.search.policy.omega_cool,
            n_pseudo: self.search.policy.n_pseudo,
            uct_c: self.search.policy.uct_c,
            mode: self.search.policy.mode,
            stabilization: self.search.policy.stabilization,
            shallow_payoff: s.shallow_payoff,
            deep_payoff: s.deep_payoff,
            other_payoff: s.other_payoff,
            tail: s.tail,
        }
    }
}

/// Sets `a.b.c = value` in `table`. The value is read as a TOML literal,
/// falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .filter(|(k, _)| !k.trim().is_empty())
        .ok_or_else(|| ConfigError::Override(assignment.to_owned()))?;
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_owned()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cursor = table;
    for p in parents {
        let entry = cursor.entry((*p).to_owned()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry.as_table_mut().ok_or_else(|| ConfigError::OverridePath(assignment.to_owned()))?;
    }
    cursor.insert((*last).to_owned(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clade_core::SelectionMode;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.search.n_init, 4);
        assert_eq!(cfg.search.policy.budget, 1000);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::from_toml_str(
            "seed = 3\n[search.tree]\nlambda_decay = 0.5\n",
            &[
                "search.policy.mode=uct".into(),
                "search.tree.lambda_decay=0.0".into(),
                "problem.kind=\"kp\"".into(),
                "search.policy.budget=20".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.search.policy.mode, SelectionMode::Uct);
        assert_eq!(cfg.search.tree.lambda_decay, 0.0);
        assert_eq!(cfg.problem.kind, Task::Kp);
        assert_eq!(cfg.search.policy.budget, 20);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("sead = 3", &[]).is_err());
        assert!(RunConfig::from_toml_str("[search.tree]\nlamda = 1", &[]).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml_str("", &["search.tree.lambda_decay=1.5".into()]).is_err());
        assert!(RunConfig::from_toml_str("", &["search.n_init=0".into()]).is_err());
        assert!(RunConfig::from_toml_str("", &["search.policy.budget=2".into()]).is_err());
        assert!(RunConfig::from_toml_str("", &["nonsense".into()]).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.problem.kind = Task::DeepPayoff;
        cfg.seed = 42;
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap(), &[]).unwrap();
        assert_eq!(back, cfg);
    }
}
