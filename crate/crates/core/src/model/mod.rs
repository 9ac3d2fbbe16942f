//! Classifier training, cross-validation and hyperparameter search.

mod cv;
mod gbdt;
mod logreg;
mod metrics;
mod search;

use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, cross_validate_with, stratified_folds, CvOutcome};
pub use gbdt::{train_gbdt, GbdtClassifier, GbdtLearner, LAMBDA, MIN_CHILD_WEIGHT};
pub use logreg::{train_logreg, LogRegFit, LogRegOptions};
pub use metrics::{weighted_metrics, WeightedMetrics};
pub use search::{search_hyperparams, search_with, RandomSearch, SearchOutcome, SearchStrategy, Trial};

use crate::error::{Error, Result};
use crate::numfmt;

/// Anything that can score rows of a column-major feature table.
pub trait Classifier: Send + Sync {
    fn n_classes(&self) -> usize;

    /// Class probability vector for one row; sums to 1.
    fn predict_proba(&self, columns: &[&[f64]], row: usize) -> Vec<f64>;

    fn predict(&self, columns: &[&[f64]], row: usize) -> usize {
        argmax(&self.predict_proba(columns, row))
    }
}

/// Fits a [`Classifier`] on a subset of rows.
pub trait Learner: Sync {
    type Model: Classifier;

    fn fit(
        &self,
        columns: &[&[f64]],
        target: &[usize],
        n_classes: usize,
        rows: &[usize],
        seed: u64,
    ) -> Result<Self::Model>;
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Gradient-boosted tree hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub colsample: f64,
}

impl HyperParams {
    pub const N_TREES: (usize, usize) = (5, 200);
    pub const LEARNING_RATE: (f64, f64) = (0.0, 0.3);
    pub const MAX_DEPTH: (usize, usize) = (6, 12);
    pub const SUBSAMPLE: (f64, f64) = (0.8, 1.0);
    pub const COLSAMPLE: (f64, f64) = (0.8, 1.0);

    pub fn validate(&self) -> Result<()> {
        fn check(name: &'static str, value: f64, (min, max): (f64, f64)) -> Result<()> {
            if value.is_finite() && (min..=max).contains(&value) {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be in [{min}, {max}], got {value}")))
            }
        }
        let (t0, t1) = Self::N_TREES;
        let (d0, d1) = Self::MAX_DEPTH;
        check("n_trees", self.n_trees as f64, (t0 as f64, t1 as f64))?;
        check("learning_rate", self.learning_rate, Self::LEARNING_RATE)?;
        check("max_depth", self.max_depth as f64, (d0 as f64, d1 as f64))?;
        check("subsample", self.subsample, Self::SUBSAMPLE)?;
        check("colsample", self.colsample, Self::COLSAMPLE)
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 6,
            subsample: 1.0,
            colsample: 1.0,
        }
    }
}

/// Random-search iterations and cross-validation folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    #[serde(default = "SearchBudget::default_iterations")]
    pub iterations: usize,
    #[serde(default = "SearchBudget::default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SearchBudget {
    fn default_iterations() -> usize {
        25
    }

    fn default_folds() -> usize {
        8
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidBudget("iterations must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidBudget("folds must be at least 2".into()));
        }
        Ok(())
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            iterations: Self::default_iterations(),
            folds: Self::default_folds(),
            rng_seed: 0,
        }
    }
}

/// Across-fold mean and population standard deviation of the three
/// validation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CvMetrics {
    #[serde(serialize_with = "numfmt::sig12")]
    pub accuracy_mean: f64,
    #[serde(serialize_with = "numfmt::sig12")]
    pub accuracy_std: f64,
    #[serde(serialize_with = "numfmt::sig12")]
    pub wprecision_mean: f64,
    #[serde(serialize_with = "numfmt::sig12")]
    pub wprecision_std: f64,
    #[serde(serialize_with = "numfmt::sig12")]
    pub wrecall_mean: f64,
    #[serde(serialize_with = "numfmt::sig12")]
    pub wrecall_std: f64,
}

impl CvMetrics {
    pub(crate) fn from_folds(folds: &[WeightedMetrics]) -> Self {
        let (accuracy_mean, accuracy_std) = mean_std(folds.iter().map(|m| m.accuracy));
        let (wprecision_mean, wprecision_std) = mean_std(folds.iter().map(|m| m.precision));
        let (wrecall_mean, wrecall_std) = mean_std(folds.iter().map(|m| m.recall));
        Self {
            accuracy_mean,
            accuracy_std,
            wprecision_mean,
            wprecision_std,
            wrecall_mean,
            wrecall_std,
        }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Cross-validated evaluation of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    #[serde(flatten)]
    pub metrics: CvMetrics,
    /// Held-out probability of each instance's ground-truth class.
    #[serde(serialize_with = "numfmt::sig12_vec")]
    pub probabilities: Vec<f64>,
    pub best_params: HyperParams,
}
