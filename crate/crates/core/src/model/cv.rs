use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{weighted_metrics, Classifier, CvMetrics, GbdtLearner, HyperParams, Learner, ModelReport, SearchBudget};
use crate::dataset::FeatureView;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Stratified fold index per row: each class is shuffled with a seeded RNG
/// and dealt round-robin into folds. The deal continues across classes so
/// fold sizes stay balanced.
pub fn stratified_folds(target: &[usize], class_names: &[String], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidBudget("folds must be at least 2".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_names.len()];
    for (i, &t) in target.iter().enumerate() {
        by_class.get_mut(t).ok_or(Error::UnknownClass(t))?.push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < folds {
            return Err(Error::ClassSmallerThanFolds {
                class: class_names[c].clone(),
                count: members.len(),
                folds,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; target.len()];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Everything produced by one cross-validation run.
pub struct CvOutcome<M> {
    pub metrics: CvMetrics,
    /// Held-out ground-truth-class probability per row.
    pub probabilities: Vec<f64>,
    pub fold_of: Vec<usize>,
    /// One fitted model per fold, trained on the other folds.
    pub models: Vec<M>,
}

impl<M> CvOutcome<M> {
    pub fn held_out_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }
}

/// Stratified k-fold evaluation of an arbitrary learner.
///
/// Folds are fitted in parallel; results are reduced in fold order so the
/// outcome does not depend on scheduling.
pub fn cross_validate_with<L: Learner>(
    view: &FeatureView,
    learner: &L,
    folds: usize,
    seed: u64,
) -> Result<CvOutcome<L::Model>>
where
    L::Model: Send,
{
    if view.n_features() == 0 {
        return Err(Error::EmptyFeatureSet);
    }
    let fold_of = stratified_folds(&view.target, &view.class_names, folds, seed)?;
    let columns = view.column_refs();
    let target = &view.target[..];

    let per_fold: Vec<Result<(L::Model, Vec<(usize, f64, usize)>)>> = (0..folds)
        .into_par_iter()
        .map(|fold| {
            let train: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] != fold).collect();
            let model = learner.fit(&columns, target, view.n_classes(), &train, derive_seed(seed, fold as u64))?;
            let held: Vec<(usize, f64, usize)> = (0..fold_of.len())
                .filter(|&i| fold_of[i] == fold)
                .map(|i| {
                    let proba = model.predict_proba(&columns, i);
                    (i, proba[target[i]], super::argmax(&proba))
                })
                .collect();
            Ok((model, held))
        })
        .collect();

    let mut probabilities = vec![f64::NAN; view.n_rows()];
    let mut fold_metrics = Vec::with_capacity(folds);
    let mut models = Vec::with_capacity(folds);
    for result in per_fold {
        let (model, held) = result?;
        let truth: Vec<usize> = held.iter().map(|h| target[h.0]).collect();
        let pred: Vec<usize> = held.iter().map(|h| h.2).collect();
        fold_metrics.push(weighted_metrics(&truth, &pred)?);
        for (i, p, _) in held {
            probabilities[i] = p;
        }
        models.push(model);
    }
    Ok(CvOutcome {
        metrics: CvMetrics::from_folds(&fold_metrics),
        probabilities,
        fold_of,
        models,
    })
}

/// Cross-validates the boosted-tree classifier with fixed hyperparameters.
pub fn cross_validate(view: &FeatureView, params: &HyperParams, budget: &SearchBudget) -> Result<ModelReport> {
    params.validate()?;
    budget.validate()?;
    let out = cross_validate_with(view, &GbdtLearner::new(*params), budget.folds, budget.rng_seed)?;
    Ok(ModelReport {
        metrics: out.metrics,
        probabilities: out.probabilities,
        best_params: *params,
    })
}
