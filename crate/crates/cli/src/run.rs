//! Non-interactive execution of an action script and the report files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use featlab_core::numfmt::round_sig;
use featlab_core::{ActionRequest, CvMetrics, HistoryEntry, SessionSettings, SessionState};
use serde::Serialize;

use crate::config::SessionConfig;

pub const HISTORY_CSV: &str = "metrics_history.csv";
pub const IMPORTANCE_JSON: &str = "importance.json";
pub const STATISTICS_JSON: &str = "statistics.json";
pub const BEST_CSV: &str = "best.csv";
pub const SESSION_JSON: &str = "session.json";
pub const REPORT_JSON: &str = "report.json";

/// Reads a script: a JSON array of action requests.
pub fn load_script(path: impl AsRef<Path>) -> anyhow::Result<Vec<ActionRequest>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).with_context(|| format!("reading script {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing script {}", path.display()))
}

/// The action that stopped a run. `index` counts from 1.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub index: usize,
    pub action: ActionRequest,
    pub error: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    /// State after the last successful action.
    pub state: SessionState,
    pub failure: Option<Failure>,
    pub files: Vec<PathBuf>,
}

/// Applies `actions` in order, stopping at the first failure.
pub fn execute(
    state: SessionState,
    actions: &[ActionRequest],
    mut on_step: impl FnMut(usize, &SessionState),
) -> (SessionState, Option<Failure>) {
    let mut state = state;
    for (i, action) in actions.iter().enumerate() {
        let t = Instant::now();
        match state.apply_action(action) {
            Ok(next) => {
                state = next;
                log::info!("action {} ({:?}) done in {:.1?}", i + 1, action.kind(), t.elapsed());
                on_step(i + 1, &state);
            }
            Err(e) => {
                return (
                    state,
                    Some(Failure {
                        index: i + 1,
                        action: action.clone(),
                        error: e.to_string(),
                    }),
                )
            }
        }
    }
    (state, None)
}

/// Opens the session described by `config`, runs the script and writes the
/// report files to `out`. Report files reflect the last successful step even
/// when an action fails.
pub fn run(config: &SessionConfig, settings: SessionSettings, actions: &[ActionRequest], out: &Path) -> anyhow::Result<RunOutcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let t = Instant::now();
    let state = SessionState::open(config.source(), settings).context("opening session")?;
    log::info!(
        "baseline: {} rows, {} features, accuracy {:.4} ({:.1?})",
        state.dataset().n_rows(),
        state.dataset().n_features(),
        state.report().metrics.accuracy_mean,
        t.elapsed()
    );
    let (state, failure) = execute(state, actions, |_, _| {});
    if let Some(f) = &failure {
        log::error!("action {} failed: {}", f.index, f.error);
    }
    let files = write_reports(&state, failure.as_ref(), out)?;
    Ok(RunOutcome { state, failure, files })
}

/// Writes every report file for `state` into `out`.
pub fn write_reports(state: &SessionState, failure: Option<&Failure>, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();

    let history = out.join(HISTORY_CSV);
    write_history_csv(state.history(), &history)?;
    files.push(history);

    let importance = out.join(IMPORTANCE_JSON);
    write_pretty(&importance, state.table())?;
    files.push(importance);

    let statistics = out.join(STATISTICS_JSON);
    write_pretty(&statistics, &state.statistics())?;
    files.push(statistics);

    let best = out.join(BEST_CSV);
    let sidecar = state.export_best(&best)?;
    files.push(best);
    files.push(sidecar);

    if state.source().is_some() {
        let session = out.join(SESSION_JSON);
        featlab_core::save_session(state, &session)?;
        files.push(session);
    }

    let report = out.join(REPORT_JSON);
    write_pretty(&report, &RunReport::new(state, failure))?;
    files.push(report);
    Ok(files)
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Summary written as `report.json`.
#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub n_rows: usize,
    pub class_names: &'a [String],
    pub class_counts: Vec<usize>,
    pub actions_applied: usize,
    pub final_active_features: Vec<String>,
    pub baseline: &'a HistoryEntry,
    pub last: &'a HistoryEntry,
    pub best_ordinal: usize,
    #[serde(serialize_with = "featlab_core::numfmt::sig12")]
    pub best_combined_score: f64,
    pub failure: Option<&'a Failure>,
}

impl<'a> RunReport<'a> {
    pub fn new(state: &'a SessionState, failure: Option<&'a Failure>) -> Self {
        let history = state.history();
        Self {
            n_rows: state.dataset().n_rows(),
            class_names: state.dataset().class_names(),
            class_counts: state.dataset().class_counts(),
            actions_applied: history.len() - 1,
            final_active_features: state.dataset().active_names(),
            baseline: &history[0],
            last: &history[history.len() - 1],
            best_ordinal: state.best().ordinal,
            best_combined_score: state.best().combined_score,
            failure,
        }
    }
}

pub const HISTORY_HEADER: [&str; 14] = [
    "ordinal",
    "action",
    "subjects",
    "detail",
    "accuracy_mean",
    "accuracy_std",
    "wprecision_mean",
    "wprecision_std",
    "wrecall_mean",
    "wrecall_std",
    "combined_score",
    "became_best",
    "n_active",
    "active_features",
];

fn num(x: f64) -> String {
    round_sig(x).to_string()
}

fn metric_fields(m: &CvMetrics) -> [String; 6] {
    [
        num(m.accuracy_mean),
        num(m.accuracy_std),
        num(m.wprecision_mean),
        num(m.wprecision_std),
        num(m.wrecall_mean),
        num(m.wrecall_std),
    ]
}

pub fn write_history_csv(history: &[HistoryEntry], path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(HISTORY_HEADER)?;
    for e in history {
        let (kind, subjects, detail) = match &e.action {
            None => ("baseline".to_string(), String::new(), String::new()),
            Some(a) => {
                let detail = match a {
                    ActionRequest::Transform { transform, .. } => transform.clone(),
                    ActionRequest::Generate { ops, .. } => ops.iter().map(|o| o.symbol()).collect::<Vec<_>>().join(" "),
                    _ => String::new(),
                };
                (
                    serde_json::to_value(a.kind())?.as_str().unwrap_or_default().to_string(),
                    a.subjects().join("|"),
                    detail,
                )
            }
        };
        let mut rec = vec![e.ordinal.to_string(), kind, subjects, detail];
        rec.extend(metric_fields(&e.metrics));
        rec.push(num(e.combined_score));
        rec.push(e.became_best.to_string());
        rec.push(e.active_features.len().to_string());
        rec.push(e.active_features.join("|"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
