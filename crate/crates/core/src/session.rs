//! Action history, re-evaluation after every action, the best-so-far rule,
//! export of the best feature set and session persistence.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassRemap, CsvSource, Dataset, FeatureDescriptor};
use crate::engineering::{
    adopt_candidate, apply_transform, build_candidate, generate_candidates, GenerationCandidate, Operator,
    TransformOverride, TransformRegistry,
};
use crate::error::{Error, Result};
use crate::model::{cross_validate, search_hyperparams, CvMetrics, HyperParams, ModelReport, SearchBudget, Trial};
use crate::numfmt;
use crate::selection::{build_table, ImportanceTable, TableConfig, DEFAULT_REPEATS};
use crate::slicing::{slice, Scope, SlicePartition, SliceThresholds};
use crate::statistics::{self, Edge, ScopeStatistics, TransformImpact, DEFAULT_MIN_COR};

pub const SESSION_VERSION: u32 = 1;

/// Everything that influences evaluation besides the data and the actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    #[serde(default)]
    pub budget: SearchBudget,
    #[serde(default)]
    pub thresholds: SliceThresholds,
    /// Reuse the baseline's best hyperparameters instead of searching again
    /// after every action.
    #[serde(default)]
    pub freeze_params: bool,
    #[serde(default = "default_repeats")]
    pub permutation_repeats: usize,
    #[serde(default = "default_min_cor")]
    pub min_cor: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transform_overrides: Vec<TransformOverride>,
}

fn default_repeats() -> usize {
    DEFAULT_REPEATS
}

fn default_min_cor() -> f64 {
    DEFAULT_MIN_COR
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            budget: SearchBudget::default(),
            thresholds: SliceThresholds::default(),
            freeze_params: false,
            permutation_repeats: DEFAULT_REPEATS,
            min_cor: DEFAULT_MIN_COR,
            transform_overrides: Vec::new(),
        }
    }
}

impl SessionSettings {
    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        if self.permutation_repeats == 0 {
            return Err(Error::InvalidRequest("permutation_repeats must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_cor) {
            return Err(Error::OutOfRange {
                name: "min_cor",
                min: 0.0,
                max: 1.0,
                value: self.min_cor,
            });
        }
        Ok(())
    }

    pub fn registry(&self) -> TransformRegistry {
        TransformRegistry::default().with_overrides(&self.transform_overrides)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Include,
    Exclude,
    Transform,
    Generate,
}

/// A user action against the current snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionRequest {
    Include { feature: String },
    Exclude { feature: String },
    Transform { feature: String, transform: String },
    /// Adopt the generated feature `sources[0] ops[0] sources[1] …`.
    Generate { sources: Vec<String>, ops: Vec<Operator> },
}

impl ActionRequest {
    pub fn kind(&self) -> ActionKind {
        match self {
            ActionRequest::Include { .. } => ActionKind::Include,
            ActionRequest::Exclude { .. } => ActionKind::Exclude,
            ActionRequest::Transform { .. } => ActionKind::Transform,
            ActionRequest::Generate { .. } => ActionKind::Generate,
        }
    }

    pub fn subjects(&self) -> Vec<String> {
        match self {
            ActionRequest::Include { feature }
            | ActionRequest::Exclude { feature }
            | ActionRequest::Transform { feature, .. } => vec![feature.clone()],
            ActionRequest::Generate { sources, .. } => sources.clone(),
        }
    }

    fn apply(&self, dataset: &Dataset, registry: &TransformRegistry) -> Result<Dataset> {
        match self {
            ActionRequest::Include { feature } => {
                if dataset.is_active(feature)? {
                    return Err(Error::InvalidRequest(format!("feature `{feature}` is already active")));
                }
                dataset.set_active(feature, true)
            }
            ActionRequest::Exclude { feature } => {
                if !dataset.is_active(feature)? {
                    return Err(Error::InvalidRequest(format!("feature `{feature}` is already excluded")));
                }
                dataset.set_active(feature, false)
            }
            ActionRequest::Transform { feature, transform } => apply_transform(dataset, registry, feature, transform),
            ActionRequest::Generate { sources, ops } => {
                let candidate = build_candidate(dataset, sources.clone(), ops.clone())?;
                adopt_candidate(dataset, &candidate)
            }
        }
    }
}

/// One row of the metrics history. Entry 0 is the baseline ("state zero").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub ordinal: usize,
    /// Absent for the baseline.
    pub action: Option<ActionRequest>,
    pub metrics: CvMetrics,
    #[serde(serialize_with = "numfmt::sig12")]
    pub combined_score: f64,
    pub became_best: bool,
    pub best_params: HyperParams,
    pub active_features: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BestSoFar {
    pub ordinal: usize,
    pub combined_score: f64,
    pub metrics: CvMetrics,
    pub dataset: Dataset,
}

/// Model outputs for one snapshot.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: ModelReport,
    pub partition: SlicePartition,
    pub table: ImportanceTable,
    /// Configurations tried by the search; empty when parameters are frozen.
    pub trials: Vec<Trial>,
}

/// Sum over accuracy, weighted precision and weighted recall of
/// `mean − std`.
pub fn combined_score(m: &CvMetrics) -> f64 {
    (m.accuracy_mean - m.accuracy_std) + (m.wprecision_mean - m.wprecision_std) + (m.wrecall_mean - m.wrecall_std)
}

/// Immutable session state. [`SessionState::apply_action`] returns a new
/// state and leaves `self` untouched.
#[derive(Debug, Clone)]
pub struct SessionState {
    source: Option<CsvSource>,
    settings: SessionSettings,
    registry: Arc<TransformRegistry>,
    dataset: Dataset,
    baseline_params: HyperParams,
    current: Arc<Evaluation>,
    history: Vec<HistoryEntry>,
    best: BestSoFar,
}

impl SessionState {
    /// Loads the CSV and evaluates the baseline.
    pub fn open(source: CsvSource, settings: SessionSettings) -> Result<Self> {
        let dataset = source.load()?;
        let mut state = Self::start(dataset, settings)?;
        state.source = Some(source);
        Ok(state)
    }

    /// Evaluates the baseline on an in-memory dataset. Such a session can be
    /// exported but not saved.
    pub fn start(dataset: Dataset, settings: SessionSettings) -> Result<Self> {
        settings.validate()?;
        let registry = Arc::new(settings.registry());
        let eval = evaluate(&dataset, &settings, None)?;
        let combined = combined_score(&eval.report.metrics);
        let baseline_params = eval.report.best_params;
        let entry = HistoryEntry {
            ordinal: 0,
            action: None,
            metrics: eval.report.metrics,
            combined_score: combined,
            became_best: true,
            best_params: baseline_params,
            active_features: dataset.active_names(),
        };
        Ok(Self {
            source: None,
            best: BestSoFar {
                ordinal: 0,
                combined_score: combined,
                metrics: eval.report.metrics,
                dataset: dataset.clone(),
            },
            settings,
            registry,
            dataset,
            baseline_params,
            current: Arc::new(eval),
            history: vec![entry],
        })
    }

    /// Applies one action, retrains and returns the new state. On error the
    /// caller's state is unchanged.
    pub fn apply_action(&self, request: &ActionRequest) -> Result<SessionState> {
        let dataset = request.apply(&self.dataset, &self.registry)?;
        let frozen = self.settings.freeze_params.then_some(self.baseline_params);
        let eval = evaluate(&dataset, &self.settings, frozen)?;
        let combined = combined_score(&eval.report.metrics);
        let became_best = combined > self.best.combined_score;
        let ordinal = self.history.len();

        let mut next = self.clone();
        next.history.push(HistoryEntry {
            ordinal,
            action: Some(request.clone()),
            metrics: eval.report.metrics,
            combined_score: combined,
            became_best,
            best_params: eval.report.best_params,
            active_features: dataset.active_names(),
        });
        if became_best {
            next.best = BestSoFar {
                ordinal,
                combined_score: combined,
                metrics: eval.report.metrics,
                dataset: dataset.clone(),
            };
        }
        next.dataset = dataset;
        next.current = Arc::new(eval);
        Ok(next)
    }

    /// Validates `request` against the current snapshot without retraining.
    pub fn check_action(&self, request: &ActionRequest) -> Result<()> {
        request.apply(&self.dataset, &self.registry).map(drop)
    }

    /// Moves the slice thresholds; only the partition is recomputed.
    pub fn with_thresholds(&self, thresholds: SliceThresholds) -> Result<SessionState> {
        let mut next = self.clone();
        let eval = Evaluation {
            partition: slice(&self.current.report.probabilities, &thresholds)?,
            ..(*self.current).clone()
        };
        next.settings.thresholds = thresholds;
        next.current = Arc::new(eval);
        Ok(next)
    }

    pub fn settings(&self) -> &SessionSettings {
        &self.settings
    }

    pub fn source(&self) -> Option<&CsvSource> {
        self.source.as_ref()
    }

    pub fn registry(&self) -> &TransformRegistry {
        &self.registry
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn evaluation(&self) -> &Evaluation {
        &self.current
    }

    pub fn report(&self) -> &ModelReport {
        &self.current.report
    }

    pub fn table(&self) -> &ImportanceTable {
        &self.current.table
    }

    pub fn partition(&self) -> &SlicePartition {
        &self.current.partition
    }

    /// Baseline plus one entry per applied action.
    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    /// Applied actions, ordinals from 1.
    pub fn log(&self) -> &[HistoryEntry] {
        &self.history[1..]
    }

    pub fn actions(&self) -> Vec<ActionRequest> {
        self.log().iter().filter_map(|e| e.action.clone()).collect()
    }

    pub fn best(&self) -> &BestSoFar {
        &self.best
    }

    /// Statistics of the active features for every scope.
    pub fn statistics(&self) -> IndexMap<String, ScopeStatistics> {
        statistics::statistics_bundle(&self.dataset.active_view(), &self.current.partition)
    }

    pub fn graph(&self, scope: Scope, min_cor: Option<f64>) -> Result<Vec<Edge>> {
        let min_cor = min_cor.unwrap_or(self.settings.min_cor);
        if !(0.0..=1.01).contains(&min_cor) {
            return Err(Error::OutOfRange {
                name: "min_cor",
                min: 0.0,
                max: 1.01,
                value: min_cor,
            });
        }
        Ok(statistics::scope_graph(
            &self.dataset.active_view(),
            &self.current.partition.rows(scope),
            min_cor,
        ))
    }

    /// Transform impact of `feature` against the other active features,
    /// restricted to a scope.
    pub fn transform_impact(&self, feature: &str, scope: Scope) -> Result<TransformImpact> {
        let values = self.dataset.values(feature)?;
        let rows = self.current.partition.rows(scope);
        let pick = |c: &[f64]| -> Vec<f64> { rows.iter().map(|&r| c[r]).collect() };
        let view = self.dataset.active_view();
        let others: Vec<Vec<f64>> = view
            .names
            .iter()
            .zip(&view.columns)
            .filter(|(n, _)| *n != feature)
            .map(|(_, c)| pick(c))
            .collect();
        let refs: Vec<&[f64]> = others.iter().map(|c| &c[..]).collect();
        let target: Vec<usize> = rows.iter().map(|&r| self.dataset.target()[r]).collect();
        Ok(statistics::transform_impact(&pick(values), &refs, &target, &self.registry))
    }

    pub fn candidates(&self, selected: &[&str]) -> Result<Vec<GenerationCandidate>> {
        generate_candidates(&self.dataset, selected)
    }

    /// Importance table with the valid candidates of `selected` appended for
    /// comparison.
    pub fn candidate_table(&self, selected: &[&str]) -> Result<ImportanceTable> {
        let candidates: Vec<(String, Arc<[f64]>)> = self
            .candidates(selected)?
            .into_iter()
            .filter(|c| c.valid && self.dataset.column(&c.name).is_none())
            .map(|c| (c.name, c.values.into()))
            .collect();
        build_table(
            &self.dataset.active_view(),
            &inactive_names(&self.dataset),
            &candidates,
            &table_config(&self.settings, self.current.report.best_params),
        )
    }

    /// Writes the best snapshot's active columns and the class index to
    /// `csv_path`, and a JSON sidecar next to it.
    pub fn export_best(&self, csv_path: impl AsRef<Path>) -> Result<PathBuf> {
        let csv_path = csv_path.as_ref();
        let ds = &self.best.dataset;
        let view = ds.active_view();
        let labels: Vec<String> = view.target.iter().map(|t| t.to_string()).collect();
        crate::dataset::write_csv(csv_path, &view.names, &view.column_refs(), ds.target_name(), &labels)?;

        let sidecar = ExportSidecar {
            csv: csv_path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            target_column: ds.target_name().to_owned(),
            class_names: ds.class_names().to_vec(),
            features: ds
                .columns()
                .iter()
                .filter(|c| c.descriptor.active)
                .map(|c| c.descriptor.clone())
                .collect(),
            thresholds: self.settings.thresholds,
            budget: self.settings.budget,
            class_remap: ClassRemap::new(
                ds.class_names()
                    .iter()
                    .enumerate()
                    .map(|(i, name)| (name.clone(), vec![i.to_string()])),
            ),
            best_ordinal: self.best.ordinal,
            combined_score: self.best.combined_score,
            metrics: self.best.metrics,
            log: self.history[1..=self.best.ordinal].to_vec(),
        };
        let json_path = csv_path.with_extension("json");
        write_json(&json_path, &sidecar)?;
        Ok(json_path)
    }

    /// Serializes the session. Engineered columns are not stored; they are
    /// rebuilt on load by replaying the actions.
    pub fn to_json(&self) -> Result<String> {
        let source = self
            .source
            .clone()
            .ok_or_else(|| Error::InvalidRequest("session was not opened from a file".into()))?;
        let file = SessionFile {
            version: SESSION_VERSION,
            source,
            settings: self.settings.clone(),
            history: self.history.clone(),
            best_ordinal: self.best.ordinal,
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::CorruptSession(e.to_string()))
    }

    /// Rebuilds a session from [`SessionState::to_json`] output, replaying
    /// every action and checking the recomputed metrics against the stored
    /// ones.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::CorruptSession(e.to_string()))?;
        let found = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::CorruptSession("missing version".into()))?;
        if found != u64::from(SESSION_VERSION) {
            return Err(Error::VersionMismatch {
                found: found as u32,
                expected: SESSION_VERSION,
            });
        }
        let file: SessionFile = serde_json::from_value(value).map_err(|e| Error::CorruptSession(e.to_string()))?;
        if file.history.is_empty() || file.history[0].action.is_some() {
            return Err(Error::CorruptSession("history must start with the baseline".into()));
        }
        let mut state = Self::open(file.source, file.settings)?;
        check_entry(0, &file.history[0], &state.history[0])?;
        for (i, stored) in file.history.iter().enumerate().skip(1) {
            let action = stored
                .action
                .as_ref()
                .ok_or_else(|| Error::CorruptSession(format!("history entry {i} has no action")))?;
            state = state.apply_action(action)?;
            check_entry(i, stored, &state.history[i])?;
        }
        if state.best.ordinal != file.best_ordinal {
            return Err(Error::ReplayMismatch {
                index: file.best_ordinal,
                stored: format!("best at {}", file.best_ordinal),
                recomputed: format!("best at {}", state.best.ordinal),
            });
        }
        Ok(state)
    }
}

fn check_entry(index: usize, stored: &HistoryEntry, recomputed: &HistoryEntry) -> Result<()> {
    let a = serde_json::to_string(stored).expect("serializable");
    let b = serde_json::to_string(recomputed).expect("serializable");
    if a != b {
        return Err(Error::ReplayMismatch {
            index,
            stored: a,
            recomputed: b,
        });
    }
    Ok(())
}

pub fn save_session(state: &SessionState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, state.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_session(path: impl AsRef<Path>) -> Result<SessionState> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SessionState::from_json(&text)
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionFile {
    version: u32,
    source: CsvSource,
    settings: SessionSettings,
    history: Vec<HistoryEntry>,
    best_ordinal: usize,
}

#[derive(Debug, Serialize)]
struct ExportSidecar {
    csv: String,
    target_column: String,
    class_names: Vec<String>,
    features: Vec<FeatureDescriptor>,
    thresholds: SliceThresholds,
    budget: SearchBudget,
    /// Maps the exported class indices back to class names on re-import.
    class_remap: ClassRemap,
    best_ordinal: usize,
    #[serde(serialize_with = "numfmt::sig12")]
    combined_score: f64,
    metrics: CvMetrics,
    log: Vec<HistoryEntry>,
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidRequest(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn inactive_names(ds: &Dataset) -> Vec<String> {
    ds.columns()
        .iter()
        .filter(|c| !c.descriptor.active)
        .map(|c| c.descriptor.name.clone())
        .collect()
}

fn table_config(settings: &SessionSettings, params: HyperParams) -> TableConfig {
    TableConfig {
        params,
        folds: settings.budget.folds,
        seed: settings.budget.rng_seed,
        repeats: settings.permutation_repeats,
    }
}

fn evaluate(dataset: &Dataset, settings: &SessionSettings, frozen: Option<HyperParams>) -> Result<Evaluation> {
    let view = dataset.active_view();
    let (report, trials) = match frozen {
        Some(params) => (cross_validate(&view, &params, &settings.budget)?, Vec::new()),
        None => {
            let out = search_hyperparams(&view, &settings.budget)?;
            (out.report, out.trials)
        }
    };
    let partition = slice(&report.probabilities, &settings.thresholds)?;
    let table = build_table(
        &view,
        &inactive_names(dataset),
        &[],
        &table_config(settings, report.best_params),
    )?;
    Ok(Evaluation {
        report,
        partition,
        table,
        trials,
    })
}
