//! Feature-engineering workbench core: data ingestion, a boosted-tree
//! classifier with cross-validation and search, data-space slicing,
//! guidance statistics, selection techniques, transforms and generation,
//! and an action-tracking session.

pub mod dataset;
pub mod engineering;
pub mod error;
pub mod linalg;
pub mod model;
pub mod numfmt;
pub mod seed;
pub mod selection;
pub mod session;
pub mod slicing;
pub mod statistics;
pub mod synthetic;

pub use dataset::{load_csv, ClassRemap, CsvSource, Dataset, FeatureDescriptor, FeatureKind, FeatureView, Lineage};
pub use engineering::{GenerationCandidate, Operator, TransformKind, TransformOverride, TransformRegistry};
pub use error::{Error, Result};
pub use model::{CvMetrics, HyperParams, ModelReport, SearchBudget};
pub use selection::{ImportanceTable, SortKey, Technique};
pub use session::{
    combined_score, load_session, save_session, ActionKind, ActionRequest, HistoryEntry, SessionSettings, SessionState,
};
pub use slicing::{set_thresholds, Scope, Slice, SlicePartition, SliceThresholds};
pub use statistics::{FeatureStatistics, ScopeStatistics, TransformImpact, VifState};
