//! Tabular data ingestion and the evolving feature store.
//!
//! A [`Dataset`] is an immutable snapshot. Every mutating operation returns a
//! new snapshot that shares column storage with its parent, so a session can
//! hold any number of historical states cheaply.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};

use crate::engineering::Operator;
use crate::error::{Error, Result};

/// How a column came to exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lineage {
    Original,
    Transformed {
        source: String,
        transform: String,
    },
    Generated {
        sources: Vec<String>,
        ops: Vec<Operator>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Original,
    Transformed,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub lineage: Lineage,
    pub active: bool,
}

impl FeatureDescriptor {
    pub fn original(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            lineage: Lineage::Original,
            active: true,
        }
    }

    pub fn kind(&self) -> FeatureKind {
        match self.lineage {
            Lineage::Original => FeatureKind::Original,
            Lineage::Transformed { .. } => FeatureKind::Transformed,
            Lineage::Generated { .. } => FeatureKind::Generated,
        }
    }

    /// Names of the columns this one was derived from.
    pub fn sources(&self) -> Vec<&str> {
        match &self.lineage {
            Lineage::Original => Vec::new(),
            Lineage::Transformed { source, .. } => vec![source.as_str()],
            Lineage::Generated { sources, .. } => sources.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    pub descriptor: FeatureDescriptor,
    pub values: Arc<[f64]>,
}

/// One output class and the raw label values folded into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGroup {
    pub class: String,
    #[serde(deserialize_with = "labels_as_strings")]
    pub labels: Vec<String>,
}

/// Mapping from raw target labels to class names. Class indices follow the
/// order of the groups.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassRemap {
    pub groups: Vec<ClassGroup>,
}

impl ClassRemap {
    pub fn new<I, S>(groups: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<S>)>,
        S: Into<String>,
    {
        Self {
            groups: groups
                .into_iter()
                .map(|(class, labels)| ClassGroup {
                    class: class.into(),
                    labels: labels.into_iter().map(Into::into).collect(),
                })
                .collect(),
        }
    }

    fn lookup(&self, label: &str) -> Option<usize> {
        self.groups
            .iter()
            .position(|g| g.labels.iter().any(|l| labels_equal(l, label)))
    }
}

fn labels_equal(a: &str, b: &str) -> bool {
    let (a, b) = (a.trim(), b.trim());
    if a == b {
        return true;
    }
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn labels_as_strings<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Label {
        Text(String),
        Number(serde_json::Number),
    }
    let raw = Vec::<Label>::deserialize(de)?;
    Ok(raw
        .into_iter()
        .map(|l| match l {
            Label::Text(s) => s,
            Label::Number(n) => n.to_string(),
        })
        .collect())
}

/// Where a dataset is read from. Kept alongside sessions so they can be
/// reloaded and replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    pub target_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_remap: Option<ClassRemap>,
    /// Rename feature columns to `F1..Fn` in file order.
    #[serde(default)]
    pub indexed_names: bool,
}

impl CsvSource {
    pub fn load(&self) -> Result<Dataset> {
        let ds = load_csv(&self.path, &self.target_column, self.class_remap.as_ref())?;
        if self.indexed_names {
            Ok(ds.with_indexed_names())
        } else {
            Ok(ds)
        }
    }
}

/// Immutable tabular snapshot: numeric feature columns plus class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<Column>,
    target: Arc<[usize]>,
    target_name: String,
    class_names: Arc<[String]>,
}

impl Dataset {
    /// Builds a dataset from original feature columns.
    pub fn new(
        features: Vec<(String, Vec<f64>)>,
        target_name: impl Into<String>,
        target: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n_rows = target.len();
        if class_names.len() < 2 {
            return Err(Error::TooFewClasses(class_names.len()));
        }
        let mut counts = vec![0usize; class_names.len()];
        for &t in &target {
            *counts.get_mut(t).ok_or(Error::UnknownClass(t))? += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass(class_names[empty].clone()));
        }
        let mut seen = HashSet::new();
        let mut columns = Vec::with_capacity(features.len());
        for (name, values) in features {
            if !seen.insert(name.clone()) {
                return Err(Error::DuplicateFeature(name));
            }
            check_column(&name, &values, n_rows)?;
            columns.push(Column {
                descriptor: FeatureDescriptor::original(name),
                values: values.into(),
            });
        }
        Ok(Self {
            columns,
            target: target.into(),
            target_name: target_name.into(),
            class_names: class_names.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn target(&self) -> &Arc<[usize]> {
        &self.target
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn class_names(&self) -> &Arc<[String]> {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &t in self.target.iter() {
            counts[t] += 1;
        }
        counts
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.descriptor.name == name)
    }

    pub fn values(&self, name: &str) -> Result<&Arc<[f64]>> {
        self.column(name)
            .map(|c| &c.values)
            .ok_or_else(|| Error::UnknownFeature(name.to_owned()))
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.descriptor.name.as_str())
    }

    pub fn active_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.descriptor.active)
            .map(|c| c.descriptor.name.clone())
            .collect()
    }

    pub fn is_active(&self, name: &str) -> Result<bool> {
        self.column(name)
            .map(|c| c.descriptor.active)
            .ok_or_else(|| Error::UnknownFeature(name.to_owned()))
    }

    /// Adds a column. The returned snapshot shares storage with `self`.
    pub fn add_feature(&self, descriptor: FeatureDescriptor, values: Vec<f64>) -> Result<Dataset> {
        if self.column(&descriptor.name).is_some() {
            return Err(Error::DuplicateFeature(descriptor.name));
        }
        for src in descriptor.sources() {
            if self.column(src).is_none() {
                return Err(Error::MissingLineageSource(src.to_owned()));
            }
        }
        check_column(&descriptor.name, &values, self.n_rows())?;
        let mut next = self.clone();
        next.columns.push(Column {
            descriptor,
            values: values.into(),
        });
        Ok(next)
    }

    /// Toggles whether a feature takes part in training.
    pub fn set_active(&self, name: &str, active: bool) -> Result<Dataset> {
        let idx = self
            .columns
            .iter()
            .position(|c| c.descriptor.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_owned()))?;
        if !active && self.columns[idx].descriptor.active {
            let n_active = self.columns.iter().filter(|c| c.descriptor.active).count();
            if n_active == 1 {
                return Err(Error::LastActiveFeature(name.to_owned()));
            }
        }
        let mut next = self.clone();
        next.columns[idx].descriptor.active = active;
        Ok(next)
    }

    /// Projection onto the active columns, in insertion order.
    pub fn active_view(&self) -> FeatureView {
        let (names, columns) = self
            .columns
            .iter()
            .filter(|c| c.descriptor.active)
            .map(|c| (c.descriptor.name.clone(), Arc::clone(&c.values)))
            .unzip();
        FeatureView {
            names,
            columns,
            target: Arc::clone(&self.target),
            class_names: Arc::clone(&self.class_names),
        }
    }

    fn with_indexed_names(mut self) -> Self {
        for (i, col) in self.columns.iter_mut().enumerate() {
            col.descriptor.name = format!("F{}", i + 1);
        }
        self
    }
}

fn check_column(name: &str, values: &[f64], n_rows: usize) -> Result<()> {
    if values.len() != n_rows {
        return Err(Error::LengthMismatch {
            expected: n_rows,
            got: values.len(),
        });
    }
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            feature: name.to_owned(),
            row,
        });
    }
    Ok(())
}

/// The columns a model is trained on. Cheap to clone.
#[derive(Debug, Clone)]
pub struct FeatureView {
    pub names: Vec<String>,
    pub columns: Vec<Arc<[f64]>>,
    pub target: Arc<[usize]>,
    pub class_names: Arc<[String]>,
}

impl FeatureView {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn column_refs(&self) -> Vec<&[f64]> {
        self.columns.iter().map(|c| &c[..]).collect()
    }

    /// Same view restricted to a single column.
    pub fn single(&self, idx: usize) -> FeatureView {
        FeatureView {
            names: vec![self.names[idx].clone()],
            columns: vec![Arc::clone(&self.columns[idx])],
            target: Arc::clone(&self.target),
            class_names: Arc::clone(&self.class_names),
        }
    }

    /// Same view without the given column indices.
    pub fn without(&self, drop: &[usize]) -> FeatureView {
        let keep = |i: &usize| !drop.contains(i);
        FeatureView {
            names: (0..self.n_features()).filter(keep).map(|i| self.names[i].clone()).collect(),
            columns: (0..self.n_features())
                .filter(keep)
                .map(|i| Arc::clone(&self.columns[i]))
                .collect(),
            target: Arc::clone(&self.target),
            class_names: Arc::clone(&self.class_names),
        }
    }

    pub fn with_column(mut self, name: String, values: Arc<[f64]>) -> FeatureView {
        self.names.push(name);
        self.columns.push(values);
        self
    }
}

/// Reads a comma-separated file with a header row.
///
/// Every non-target column must parse as a finite real. Blank cells are
/// rejected. Without a remap, classes are the distinct target labels in
/// ascending order (numeric order when every label is a number).
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, remap: Option<&ClassRemap>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingTargetColumn(target_column.to_owned()))?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.to_owned())
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); feature_names.len()];
    let mut labels = Vec::new();

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let row = row + 1;
        let mut f = 0;
        for (i, cell) in record.iter().enumerate() {
            if i == target_idx {
                labels.push(cell.to_owned());
                continue;
            }
            let value = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::NonNumeric {
                row,
                column: feature_names[f].clone(),
                value: cell.to_owned(),
            })?;
            columns[f].push(value);
            f += 1;
        }
    }

    let (target, class_names) = match remap {
        Some(remap) => {
            let target = labels
                .iter()
                .map(|l| remap.lookup(l).ok_or_else(|| Error::UnmappedLabel(l.clone())))
                .collect::<Result<Vec<_>>>()?;
            let names = remap.groups.iter().map(|g| g.class.clone()).collect();
            (target, names)
        }
        None => natural_classes(&labels),
    };

    Dataset::new(
        feature_names.into_iter().zip(columns).collect(),
        target_column,
        target,
        class_names,
    )
}

/// Writes feature columns and a label column as a comma-separated file.
/// Values use the shortest representation that parses back to the same
/// `f64`.
pub fn write_csv(
    path: impl AsRef<Path>,
    names: &[String],
    columns: &[&[f64]],
    target_name: &str,
    labels: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(names.iter().map(String::as_str).chain([target_name]))?;
    let mut record = Vec::with_capacity(names.len() + 1);
    for (row, label) in labels.iter().enumerate() {
        record.clear();
        record.extend(columns.iter().map(|c| c[row].to_string()));
        record.push(label.clone());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn natural_classes(labels: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut distinct: Vec<&String> = labels.iter().collect::<HashSet<_>>().into_iter().collect();
    let numeric: Option<Vec<f64>> = distinct.iter().map(|l| l.parse::<f64>().ok()).collect();
    if numeric.is_some() {
        distinct.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    } else {
        distinct.sort();
    }
    let names: Vec<String> = distinct.into_iter().cloned().collect();
    let target = labels
        .iter()
        .map(|l| names.iter().position(|n| n == l).expect("label present"))
        .collect();
    (target, names)
}
