use clade::config::{apply_override, RunConfig, Task};
use clade_core::SelectionMode;
use proptest::prelude::*;

proptest! {
    #[test]
    fn written_configs_load_back(
        seed in 0..=clade::config::MAX_SEED,
        budget in 4u64..100_000,
        lambda in 0.0f64..=1.0,
        gamma in 0.01f64..0.99,
        mode in 0usize..3,
        kind in 0usize..5,
    ) {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.search.policy.budget = budget;
        cfg.search.tree.lambda_decay = lambda;
        cfg.search.tree.gamma_freeze = gamma;
        cfg.search.policy.mode = [SelectionMode::CladeThompson, SelectionMode::NodeThompson, SelectionMode::Uct][mode];
        cfg.problem.kind = [Task::Tsp, Task::Kp, Task::Bpp, Task::AcoTsp, Task::DeepPayoff][kind];
        let text = cfg.to_toml_string().unwrap();
        prop_assert_eq!(RunConfig::from_toml_str(&text, &[]).unwrap(), cfg);
    }

    #[test]
    fn overrides_win_over_file_values(budget in 4u64..10_000, lambda in 0.0f64..=1.0) {
        let file = "[search.policy]\nbudget = 50\n[search.tree]\nlambda_decay = 0.8\n";
        let cfg = RunConfig::from_toml_str(
            file,
            &[format!("search.policy.budget={budget}"), format!("search.tree.lambda_decay={lambda:?}")],
        )
        .unwrap();
        prop_assert_eq!(cfg.search.policy.budget, budget);
        prop_assert_eq!(cfg.search.tree.lambda_decay, lambda);
    }
}

#[test]
fn bare_words_become_strings() {
    let mut t = toml::Table::new();
    apply_override(&mut t, "problem.kind=kp").unwrap();
    apply_override(&mut t, "generator.llm.model = gpt-4o").unwrap();
    let cfg: RunConfig = t.try_into().unwrap();
    assert_eq!(cfg.problem.kind, Task::Kp);
    assert_eq!(cfg.generator.llm.model, "gpt-4o");
}

#[test]
fn budget_below_initialization_is_rejected() {
    let err = RunConfig::from_toml_str("[search]\nn_init = 8\n[search.policy]\nbudget = 5\n", &[]).unwrap_err();
    assert!(err.to_string().contains("budget"), "{err}");
}

#[test]
fn seeds_beyond_toml_range_are_rejected() {
    let mut cfg = RunConfig::default();
    cfg.seed = u64::MAX;
    assert!(cfg.validate().is_err());
    assert!(cfg.to_toml_string().is_err());
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        RunConfig::load(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 3);
}
