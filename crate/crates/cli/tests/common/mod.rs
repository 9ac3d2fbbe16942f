#![allow(dead_code)]

use std::path::Path;

use featlab_cli::SessionConfig;
use featlab_core::dataset::write_csv;
use featlab_core::synthetic::planted_product;
use featlab_core::SearchBudget;

/// Writes a planted-product CSV into `dir` and returns a small-budget config
/// for it.
pub fn fixture(dir: &Path, n: usize, iterations: usize, folds: usize) -> SessionConfig {
    let ds = planted_product(n, 3, 11).unwrap();
    let view = ds.active_view();
    let labels: Vec<String> = view.target.iter().map(|&t| ds.class_names()[t].clone()).collect();
    let csv = dir.join("planted.csv");
    write_csv(&csv, &view.names, &view.column_refs(), "class", &labels).unwrap();
    let mut cfg = SessionConfig::new(csv, "class");
    cfg.budget = SearchBudget {
        iterations,
        folds,
        rng_seed: 0,
    };
    cfg.seed = Some(5);
    cfg.permutation_repeats = 2;
    cfg
}

pub fn write_config(dir: &Path, cfg: &SessionConfig) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}
