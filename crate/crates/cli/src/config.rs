//! Session config files.

use std::path::{Path, PathBuf};

use anyhow::Context;
use featlab_core::engineering::TransformOverride;
use featlab_core::session::SessionSettings;
use featlab_core::{ClassRemap, CsvSource, SearchBudget, SliceThresholds};
use serde::{Deserialize, Serialize};

fn default_repeats() -> usize {
    SessionSettings::default().permutation_repeats
}

fn default_min_cor() -> f64 {
    SessionSettings::default().min_cor
}

/// Everything needed to open a session.
///
/// ```json
/// {
///   "csv": "winequality-red.csv",
///   "target": "quality",
///   "class_remap": [
///     {"class": "inferior", "labels": [3, 4]},
///     {"class": "fine", "labels": [5, 6]},
///     {"class": "superior", "labels": [7, 8]}
///   ],
///   "indexed_names": true,
///   "thresholds": {"low": 25, "high": 75},
///   "budget": {"iterations": 25, "folds": 8},
///   "seed": 7
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// Relative paths are resolved against the config file's directory.
    pub csv: PathBuf,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_remap: Option<ClassRemap>,
    #[serde(default)]
    pub indexed_names: bool,
    #[serde(default)]
    pub thresholds: SliceThresholds,
    #[serde(default)]
    pub budget: SearchBudget,
    /// Overrides `budget.rng_seed` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub freeze_params: bool,
    #[serde(default = "default_repeats")]
    pub permutation_repeats: usize,
    #[serde(default = "default_min_cor")]
    pub min_cor: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transform_overrides: Vec<TransformOverride>,
}

impl SessionConfig {
    pub fn new(csv: impl Into<PathBuf>, target: impl Into<String>) -> Self {
        let defaults = SessionSettings::default();
        Self {
            csv: csv.into(),
            target: target.into(),
            class_remap: None,
            indexed_names: false,
            thresholds: defaults.thresholds,
            budget: defaults.budget,
            seed: None,
            freeze_params: defaults.freeze_params,
            permutation_repeats: defaults.permutation_repeats,
            min_cor: defaults.min_cor,
            transform_overrides: Vec::new(),
        }
    }

    /// Reads and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: SessionConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if cfg.csv.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.csv = base.join(&cfg.csv);
        }
        cfg.settings(None)?;
        Ok(cfg)
    }

    pub fn source(&self) -> CsvSource {
        let path = std::path::absolute(&self.csv).unwrap_or_else(|_| self.csv.clone());
        CsvSource {
            path,
            target_column: self.target.clone(),
            class_remap: self.class_remap.clone(),
            indexed_names: self.indexed_names,
        }
    }

    /// Session settings, with `seed` (or the config's own seed) applied.
    pub fn settings(&self, seed: Option<u64>) -> featlab_core::Result<SessionSettings> {
        let mut budget = self.budget;
        if let Some(s) = seed.or(self.seed) {
            budget.rng_seed = s;
        }
        let settings = SessionSettings {
            budget,
            thresholds: self.thresholds,
            freeze_params: self.freeze_params,
            permutation_repeats: self.permutation_repeats,
            min_cor: self.min_cor,
            transform_overrides: self.transform_overrides.clone(),
        };
        settings.validate()?;
        Ok(settings)
    }
}
