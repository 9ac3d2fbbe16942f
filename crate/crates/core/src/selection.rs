//! Five automatic feature-selection techniques and the averaged importance
//! table.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureView;
use crate::error::{Error, Result};
use crate::model::{cross_validate_with, train_logreg, Classifier, GbdtClassifier, GbdtLearner, HyperParams, LogRegOptions};
use crate::numfmt;
use crate::seed::derive_seed;
use crate::statistics::anova_f;

pub const DEFAULT_REPEATS: usize = 5;
/// Folds used by the single-feature accuracy technique.
pub const ACCURACY_FOLDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Univariate,
    Impurity,
    Permutation,
    Accuracy,
    Ranking,
}

impl Technique {
    pub const ALL: [Technique; 5] = [
        Technique::Univariate,
        Technique::Impurity,
        Technique::Permutation,
        Technique::Accuracy,
        Technique::Ranking,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::InvalidRequest(format!("unknown technique `{name}`")))
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Technique::Univariate => "univariate",
            Technique::Impurity => "impurity",
            Technique::Permutation => "permutation",
            Technique::Accuracy => "accuracy",
            Technique::Ranking => "ranking",
        })
    }
}

/// ANOVA F of every column against the target.
pub fn univariate_fs(view: &FeatureView) -> Result<Vec<f64>> {
    view.columns.iter().map(|c| anova_f(c, &view.target)).collect()
}

fn accuracy_on(model: &impl Classifier, columns: &[&[f64]], target: &[usize], rows: &[usize]) -> f64 {
    let hits = rows.iter().filter(|&&r| model.predict(columns, r) == target[r]).count();
    hits as f64 / rows.len() as f64
}

/// Mean accuracy drop on `rows` when one column at a time is shuffled among
/// those rows, over `repeats` shuffles. Negative means are clipped to 0.
pub fn permutation_fi(
    model: &impl Classifier,
    columns: &[&[f64]],
    target: &[usize],
    rows: &[usize],
    seed: u64,
    repeats: usize,
) -> Vec<f64> {
    if rows.is_empty() || repeats == 0 {
        return vec![0.0; columns.len()];
    }
    let base = accuracy_on(model, columns, target, rows);
    (0..columns.len())
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, j as u64));
            let mut shuffled = columns[j].to_vec();
            let mut values: Vec<f64> = rows.iter().map(|&r| columns[j][r]).collect();
            let mut total = 0.0;
            for _ in 0..repeats {
                values.shuffle(&mut rng);
                for (&r, &v) in rows.iter().zip(&values) {
                    shuffled[r] = v;
                }
                let mut cols = columns.to_vec();
                cols[j] = &shuffled;
                total += base - accuracy_on(model, &cols, target, rows);
            }
            (total / repeats as f64).max(0.0)
        })
        .collect()
}

/// Per-feature accuracy of the boosted model trained on that column alone,
/// from stratified 3-fold cross-validation.
pub fn accuracy_fi(view: &FeatureView, params: &HyperParams, seed: u64) -> Result<Vec<f64>> {
    if view.n_features() == 0 {
        return Err(Error::EmptyFeatureSet);
    }
    let learner = GbdtLearner::new(*params);
    (0..view.n_features())
        .into_par_iter()
        .map(|j| Ok(cross_validate_with(&view.single(j), &learner, ACCURACY_FOLDS, seed)?.metrics.accuracy_mean))
        .collect()
}

/// Recursive feature elimination with logistic regression. The feature
/// removed at step `s` (0-based) of `n` gets rank `n − s`; the survivor gets
/// rank 1. Scores are `(n − rank + 1) / n`.
pub fn ranking_fs(view: &FeatureView) -> Result<Vec<f64>> {
    let n = view.n_features();
    if n == 0 {
        return Err(Error::EmptyFeatureSet);
    }
    let all = view.column_refs();
    let opts = LogRegOptions::default();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut rank = vec![0usize; n];
    while remaining.len() > 1 {
        let cols: Vec<&[f64]> = remaining.iter().map(|&j| all[j]).collect();
        let fit = train_logreg(&cols, &view.target, view.n_classes(), &opts)?;
        let norms = fit.column_norms();
        let weakest = (1..norms.len()).fold(0, |w, i| if norms[i] < norms[w] { i } else { w });
        rank[remaining[weakest]] = remaining.len();
        remaining.remove(weakest);
    }
    rank[remaining[0]] = 1;
    Ok(rank.iter().map(|&r| (n - r + 1) as f64 / n as f64).collect())
}

/// Maps scores to [0, 1] by min-max. Constant scores map to 1.
pub fn min_max_normalize(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
}

/// One value per technique.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    #[serde(serialize_with = "numfmt::sig12")]
    pub univariate: f64,
    #[serde(serialize_with = "numfmt::sig12")]
    pub impurity: f64,
    #[serde(serialize_with = "numfmt::sig12")]
    pub permutation: f64,
    #[serde(serialize_with = "numfmt::sig12")]
    pub accuracy: f64,
    #[serde(serialize_with = "numfmt::sig12")]
    pub ranking: f64,
}

impl Scores {
    pub fn get(&self, t: Technique) -> f64 {
        match t {
            Technique::Univariate => self.univariate,
            Technique::Impurity => self.impurity,
            Technique::Permutation => self.permutation,
            Technique::Accuracy => self.accuracy,
            Technique::Ranking => self.ranking,
        }
    }

    fn set(&mut self, t: Technique, v: f64) {
        match t {
            Technique::Univariate => self.univariate = v,
            Technique::Impurity => self.impurity = v,
            Technique::Permutation => self.permutation = v,
            Technique::Accuracy => self.accuracy = v,
            Technique::Ranking => self.ranking = v,
        }
    }

    fn mean(&self) -> f64 {
        Technique::ALL.iter().map(|&t| self.get(t)).sum::<f64>() / Technique::ALL.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub name: String,
    /// Absent for excluded features.
    pub raw: Option<Scores>,
    pub normalized: Option<Scores>,
    #[serde(serialize_with = "numfmt::sig12_opt")]
    pub average: Option<f64>,
    pub active: bool,
    /// Generated column shown for comparison, not yet adopted.
    pub candidate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "by", content = "technique")]
pub enum SortKey {
    Average,
    Technique(Technique),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    /// Rows in display order.
    pub rows: Vec<ImportanceRow>,
    pub sort: SortKey,
}

impl ImportanceTable {
    /// Re-sorts descending by `key`. Ties keep insertion order; rows without
    /// scores go last.
    pub fn sorted(&self, key: SortKey, insertion: &[String]) -> ImportanceTable {
        let pos = |name: &str| insertion.iter().position(|n| n == name).unwrap_or(usize::MAX);
        let value = |r: &ImportanceRow| match key {
            SortKey::Average => r.average,
            SortKey::Technique(t) => r.normalized.map(|s| s.get(t)),
        };
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| match (value(a), value(b)) {
            (Some(x), Some(y)) => y.total_cmp(&x).then(pos(&a.name).cmp(&pos(&b.name))),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => pos(&a.name).cmp(&pos(&b.name)),
        });
        ImportanceTable { rows, sort: key }
    }

    pub fn row(&self, name: &str) -> Option<&ImportanceRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Names of scored rows in the current order.
    pub fn ranked_names(&self) -> Vec<&str> {
        self.rows.iter().filter(|r| r.average.is_some()).map(|r| r.name.as_str()).collect()
    }
}

/// Seeds and settings for a table build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableConfig {
    pub params: HyperParams,
    pub folds: usize,
    pub seed: u64,
    pub repeats: usize,
}

/// Raw scores of all five techniques for every column of `view`.
///
/// Impurity and permutation scores come from the per-fold models of a
/// cross-validation run with `cfg.params`; permutation uses each fold's
/// held-out rows. Impurity is the mean over fold models.
pub fn technique_scores(view: &FeatureView, cfg: &TableConfig) -> Result<Vec<Scores>> {
    let f = view.n_features();
    let (univariate, rest) = rayon::join(
        || univariate_fs(view),
        || -> Result<_> {
            let cv = cross_validate_with(view, &GbdtLearner::new(cfg.params), cfg.folds, cfg.seed)?;
            let columns = view.column_refs();
            let per_fold: Vec<(Vec<f64>, Vec<f64>)> = cv
                .models
                .par_iter()
                .enumerate()
                .map(|(fold, m): (usize, &GbdtClassifier)| {
                    let rows = cv.held_out_rows(fold);
                    let perm = permutation_fi(m, &columns, &view.target, &rows, derive_seed(cfg.seed, fold as u64), cfg.repeats);
                    (m.impurity_importance(), perm)
                })
                .collect();
            let mut impurity = vec![0.0; f];
            let mut permutation = vec![0.0; f];
            for (imp, perm) in &per_fold {
                for j in 0..f {
                    impurity[j] += imp[j] / per_fold.len() as f64;
                    permutation[j] += perm[j] / per_fold.len() as f64;
                }
            }
            let accuracy = accuracy_fi(view, &cfg.params, cfg.seed)?;
            let ranking = ranking_fs(view)?;
            Ok((impurity, permutation, accuracy, ranking))
        },
    );
    let univariate = univariate?;
    let (impurity, permutation, accuracy, ranking) = rest?;
    Ok((0..f)
        .map(|j| Scores {
            univariate: univariate[j],
            impurity: impurity[j],
            permutation: permutation[j],
            accuracy: accuracy[j],
            ranking: ranking[j],
        })
        .collect())
}

/// Normalizes raw scores per technique and averages them.
pub fn assemble_table(names: &[String], raw: &[Scores], candidates: &[bool], excluded: &[String]) -> ImportanceTable {
    let mut normalized = vec![Scores::default(); raw.len()];
    for t in Technique::ALL {
        let column: Vec<f64> = raw.iter().map(|s| s.get(t)).collect();
        for (n, v) in normalized.iter_mut().zip(min_max_normalize(&column)) {
            n.set(t, v);
        }
    }
    let mut rows: Vec<ImportanceRow> = names
        .iter()
        .enumerate()
        .map(|(i, name)| ImportanceRow {
            name: name.clone(),
            raw: Some(raw[i]),
            normalized: Some(normalized[i]),
            average: Some(normalized[i].mean()),
            active: !candidates[i],
            candidate: candidates[i],
        })
        .collect();
    rows.extend(excluded.iter().map(|name| ImportanceRow {
        name: name.clone(),
        raw: None,
        normalized: None,
        average: None,
        active: false,
        candidate: false,
    }));
    let insertion: Vec<String> = rows.iter().map(|r| r.name.clone()).collect();
    ImportanceTable { rows, sort: SortKey::Average }.sorted(SortKey::Average, &insertion)
}

/// Importance table over the active view plus optional candidate columns.
/// `excluded` features are listed without scores.
pub fn build_table(
    view: &FeatureView,
    excluded: &[String],
    candidates: &[(String, Arc<[f64]>)],
    cfg: &TableConfig,
) -> Result<ImportanceTable> {
    let mut extended = view.clone();
    for (name, values) in candidates {
        extended = extended.with_column(name.clone(), Arc::clone(values));
    }
    let raw = technique_scores(&extended, cfg)?;
    let is_candidate: Vec<bool> = (0..extended.n_features()).map(|j| j >= view.n_features()).collect();
    Ok(assemble_table(&extended.names, &raw, &is_candidate, excluded))
}
