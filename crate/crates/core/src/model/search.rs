use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cross_validate, CvMetrics, HyperParams, ModelReport, SearchBudget};
use crate::dataset::FeatureView;
use crate::error::Result;

/// Proposes hyperparameter configurations to evaluate.
pub trait SearchStrategy {
    fn propose(&mut self) -> HyperParams;
}

/// Uniform sampling over the [`HyperParams`] ranges.
pub struct RandomSearch {
    rng: ChaCha8Rng,
}

impl RandomSearch {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SearchStrategy for RandomSearch {
    fn propose(&mut self) -> HyperParams {
        let r = &mut self.rng;
        HyperParams {
            n_trees: r.gen_range(HyperParams::N_TREES.0..=HyperParams::N_TREES.1),
            learning_rate: r.gen_range(HyperParams::LEARNING_RATE.0..=HyperParams::LEARNING_RATE.1),
            max_depth: r.gen_range(HyperParams::MAX_DEPTH.0..=HyperParams::MAX_DEPTH.1),
            subsample: r.gen_range(HyperParams::SUBSAMPLE.0..=HyperParams::SUBSAMPLE.1),
            colsample: r.gen_range(HyperParams::COLSAMPLE.0..=HyperParams::COLSAMPLE.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub params: HyperParams,
    pub metrics: CvMetrics,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_params: HyperParams,
    pub report: ModelReport,
    /// Every evaluated configuration, in proposal order.
    pub trials: Vec<Trial>,
}

/// Seeded random search keeping the configuration with the highest mean
/// accuracy (first one wins on ties).
pub fn search_hyperparams(view: &FeatureView, budget: &SearchBudget) -> Result<SearchOutcome> {
    search_with(view, budget, &mut RandomSearch::new(budget.rng_seed))
}

pub fn search_with(view: &FeatureView, budget: &SearchBudget, strategy: &mut dyn SearchStrategy) -> Result<SearchOutcome> {
    budget.validate()?;
    let proposals: Vec<HyperParams> = (0..budget.iterations).map(|_| strategy.propose()).collect();
    let reports: Vec<Result<ModelReport>> = proposals
        .par_iter()
        .map(|p| cross_validate(view, p, budget))
        .collect();

    let mut best: Option<ModelReport> = None;
    let mut trials = Vec::with_capacity(proposals.len());
    for (params, report) in proposals.into_iter().zip(reports) {
        let report = report?;
        trials.push(Trial {
            params,
            metrics: report.metrics,
        });
        if best
            .as_ref()
            .map_or(true, |b| report.metrics.accuracy_mean > b.metrics.accuracy_mean)
        {
            best = Some(report);
        }
    }
    let report = best.expect("at least one iteration");
    Ok(SearchOutcome {
        best_params: report.best_params,
        report,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view() -> FeatureView {
        let n = 60;
        let x: Vec<f64> = (0..n).map(|i| ((i * 37) % 60) as f64).collect();
        let target: Vec<usize> = x.iter().map(|&v| usize::from(v >= 30.0)).collect();
        FeatureView {
            names: vec!["x".into()],
            columns: vec![x.into()],
            target: target.into(),
            class_names: vec!["a".to_string(), "b".to_string()].into(),
        }
    }

    #[test]
    fn proposals_stay_in_range() {
        let mut s = RandomSearch::new(4);
        for _ in 0..200 {
            s.propose().validate().unwrap();
        }
    }

    #[test]
    fn single_iteration_returns_the_sample() {
        let budget = SearchBudget {
            iterations: 1,
            folds: 3,
            rng_seed: 12,
        };
        let out = search_hyperparams(&view(), &budget).unwrap();
        assert_eq!(out.best_params, RandomSearch::new(12).propose());
        assert_eq!(out.trials.len(), 1);
    }

    #[test]
    fn best_dominates_trials_and_is_deterministic() {
        let budget = SearchBudget {
            iterations: 4,
            folds: 3,
            rng_seed: 2,
        };
        let a = search_hyperparams(&view(), &budget).unwrap();
        let b = search_hyperparams(&view(), &budget).unwrap();
        assert_eq!(a.best_params, b.best_params);
        assert_eq!(a.report, b.report);
        for t in &a.trials {
            assert!(a.report.metrics.accuracy_mean >= t.metrics.accuracy_mean);
        }
        let first_best = a
            .trials
            .iter()
            .find(|t| t.metrics.accuracy_mean == a.report.metrics.accuracy_mean)
            .unwrap();
        assert_eq!(first_best.params, a.best_params);
    }
}
