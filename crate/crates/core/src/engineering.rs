//! Feature transformation catalog and arithmetic feature generation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureDescriptor, Lineage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Logarithmic,
    Exponential,
    Power,
    Root,
    Reciprocal,
    Scaling,
}

/// The mathematical function behind a transform id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransformKind {
    #[serde(rename = "l2")]
    Log2,
    #[serde(rename = "l10")]
    Log10,
    #[serde(rename = "l1p")]
    Log1p,
    #[serde(rename = "e")]
    Exp,
    #[serde(rename = "p2")]
    Square,
    #[serde(rename = "p3")]
    Cube,
    #[serde(rename = "p4")]
    Fourth,
    #[serde(rename = "r2")]
    Sqrt,
    #[serde(rename = "r3")]
    Cbrt,
    #[serde(rename = "i")]
    Reciprocal,
    #[serde(rename = "z")]
    ZScore,
    #[serde(rename = "m")]
    MinMax,
    #[serde(rename = "b")]
    BoxCox,
}

impl TransformKind {
    pub const ALL: [TransformKind; 13] = [
        TransformKind::Log2,
        TransformKind::Log10,
        TransformKind::Log1p,
        TransformKind::Exp,
        TransformKind::Square,
        TransformKind::Cube,
        TransformKind::Fourth,
        TransformKind::Sqrt,
        TransformKind::Cbrt,
        TransformKind::Reciprocal,
        TransformKind::ZScore,
        TransformKind::MinMax,
        TransformKind::BoxCox,
    ];

    /// Suffix token used in column names.
    pub fn id(self) -> &'static str {
        match self {
            TransformKind::Log2 => "l2",
            TransformKind::Log10 => "l10",
            TransformKind::Log1p => "l1p",
            TransformKind::Exp => "e",
            TransformKind::Square => "p2",
            TransformKind::Cube => "p3",
            TransformKind::Fourth => "p4",
            TransformKind::Sqrt => "r2",
            TransformKind::Cbrt => "r3",
            TransformKind::Reciprocal => "i",
            TransformKind::ZScore => "z",
            TransformKind::MinMax => "m",
            TransformKind::BoxCox => "b",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == id)
            .ok_or_else(|| Error::UnknownTransform(id.to_owned()))
    }

    pub fn category(self) -> Category {
        use TransformKind::*;
        match self {
            Log2 | Log10 | Log1p => Category::Logarithmic,
            Exp => Category::Exponential,
            Square | Cube | Fourth => Category::Power,
            Sqrt | Cbrt => Category::Root,
            Reciprocal => Category::Reciprocal,
            ZScore | MinMax | BoxCox => Category::Scaling,
        }
    }

    /// Whether the transform preserves the order of values.
    pub fn is_monotone(self) -> bool {
        use TransformKind::*;
        matches!(self, Log2 | Log10 | Log1p | Exp | Cube | Sqrt | Cbrt | ZScore | MinMax | BoxCox)
    }

    /// Applies the function to a whole column. Box-Cox picks its λ from the
    /// column itself.
    pub fn apply(self, x: &[f64]) -> Vec<f64> {
        use TransformKind::*;
        match self {
            Log2 => x.iter().map(|v| v.log2()).collect(),
            Log10 => x.iter().map(|v| v.log10()).collect(),
            Log1p => x.iter().map(|v| v.ln_1p()).collect(),
            Exp => x.iter().map(|v| v.exp()).collect(),
            Square => x.iter().map(|v| v * v).collect(),
            Cube => x.iter().map(|v| v * v * v).collect(),
            Fourth => x.iter().map(|v| v.powi(4)).collect(),
            Sqrt => x.iter().map(|v| v.sqrt()).collect(),
            Cbrt => x.iter().map(|v| v.cbrt()).collect(),
            Reciprocal => x.iter().map(|v| 1.0 / v).collect(),
            ZScore => {
                let n = x.len() as f64;
                let mean = x.iter().sum::<f64>() / n;
                let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
                x.iter().map(|v| (v - mean) / sd).collect()
            }
            MinMax => {
                let (lo, hi) = min_max(x);
                if hi > lo {
                    x.iter().map(|v| (v - lo) / (hi - lo)).collect()
                } else {
                    vec![0.0; x.len()]
                }
            }
            BoxCox => box_cox(x, box_cox_lambda(x)),
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Applicability predicate over a column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Requirements {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_gt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_ge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_le: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub nonzero: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub nonconstant: bool,
}

impl Requirements {
    /// `Err(reason)` naming the first violated predicate.
    pub fn check(&self, x: &[f64]) -> std::result::Result<(), String> {
        let (lo, hi) = min_max(x);
        if let Some(b) = self.min_gt {
            if lo <= b {
                return Err(format!("requires min > {b}, column min is {lo}"));
            }
        }
        if let Some(b) = self.min_ge {
            if lo < b {
                return Err(format!("requires min >= {b}, column min is {lo}"));
            }
        }
        if let Some(b) = self.max_le {
            if hi > b {
                return Err(format!("requires max <= {b}, column max is {hi}"));
            }
        }
        if self.nonzero && x.iter().any(|&v| v == 0.0) {
            return Err("requires no zero values".into());
        }
        if self.nonconstant && hi == lo {
            return Err("requires nonzero variance".into());
        }
        Ok(())
    }
}

/// One registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub id: TransformKind,
    pub category: Category,
    #[serde(default)]
    pub requires: Requirements,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
}

fn enabled_default() -> bool {
    true
}

/// Partial update of a registry entry, as read from a session config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformOverride {
    pub id: TransformKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires: Option<Requirements>,
}

/// Data-driven transform catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransformRegistry {
    pub transforms: Vec<TransformSpec>,
}

impl Default for TransformRegistry {
    fn default() -> Self {
        use TransformKind::*;
        let spec = |id: TransformKind, requires: Requirements| TransformSpec {
            id,
            category: id.category(),
            requires,
            enabled: true,
        };
        let positive = Requirements {
            min_gt: Some(0.0),
            ..Default::default()
        };
        let none = Requirements::default();
        Self {
            transforms: vec![
                spec(Log2, positive),
                spec(Log10, positive),
                spec(
                    Log1p,
                    Requirements {
                        min_gt: Some(-1.0),
                        ..Default::default()
                    },
                ),
                spec(
                    Exp,
                    Requirements {
                        max_le: Some(30.0),
                        ..Default::default()
                    },
                ),
                spec(Square, none),
                spec(Cube, none),
                spec(Fourth, none),
                spec(
                    Sqrt,
                    Requirements {
                        min_ge: Some(0.0),
                        ..Default::default()
                    },
                ),
                spec(Cbrt, none),
                spec(
                    Reciprocal,
                    Requirements {
                        nonzero: true,
                        ..Default::default()
                    },
                ),
                spec(
                    ZScore,
                    Requirements {
                        nonconstant: true,
                        ..Default::default()
                    },
                ),
                spec(MinMax, none),
                spec(BoxCox, positive),
            ],
        }
    }
}

impl TransformRegistry {
    pub fn with_overrides(mut self, overrides: &[TransformOverride]) -> Self {
        for o in overrides {
            if let Some(spec) = self.transforms.iter_mut().find(|s| s.id == o.id) {
                if let Some(enabled) = o.enabled {
                    spec.enabled = enabled;
                }
                if let Some(requires) = o.requires {
                    spec.requires = requires;
                }
            }
        }
        self
    }

    pub fn get(&self, id: &str) -> Result<&TransformSpec> {
        let kind = TransformKind::from_id(id)?;
        self.transforms
            .iter()
            .find(|s| s.id == kind && s.enabled)
            .ok_or_else(|| Error::UnknownTransform(id.to_owned()))
    }

    /// Enabled transforms whose predicate holds for `column`.
    pub fn list_transforms(&self, column: &[f64]) -> Vec<&TransformSpec> {
        self.transforms
            .iter()
            .filter(|s| s.enabled && s.requires.check(column).is_ok())
            .collect()
    }

    /// Applies a transform after checking applicability and finiteness of
    /// the result.
    pub fn transform_values(&self, feature: &str, id: &str, column: &[f64]) -> Result<Vec<f64>> {
        let spec = self.get(id)?;
        spec.requires.check(column).map_err(|reason| Error::InapplicableTransform {
            feature: feature.to_owned(),
            transform: id.to_owned(),
            reason,
        })?;
        let out = spec.id.apply(column);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::InapplicableTransform {
                feature: feature.to_owned(),
                transform: id.to_owned(),
                reason: "produces non-finite values".into(),
            });
        }
        Ok(out)
    }
}

/// Adds `<name>_<id>` as an active column and deactivates the source.
pub fn apply_transform(dataset: &Dataset, registry: &TransformRegistry, feature: &str, id: &str) -> Result<Dataset> {
    let values = registry.transform_values(feature, id, dataset.values(feature)?)?;
    let descriptor = FeatureDescriptor {
        name: format!("{feature}_{id}"),
        lineage: Lineage::Transformed {
            source: feature.to_owned(),
            transform: id.to_owned(),
        },
        active: true,
    };
    let next = dataset.add_feature(descriptor, values)?;
    if next.is_active(feature)? {
        next.set_active(feature, false)
    } else {
        Ok(next)
    }
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn box_cox(x: &[f64], lambda: f64) -> Vec<f64> {
    if lambda == 0.0 {
        x.iter().map(|v| v.ln()).collect()
    } else {
        x.iter().map(|v| (v.powf(lambda) - 1.0) / lambda).collect()
    }
}

/// Maximum-likelihood λ on the grid −2.0, −1.9, …, 2.0. Requires positive
/// input.
pub fn box_cox_lambda(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let log_sum: f64 = x.iter().map(|v| v.ln()).sum();
    let mut best = (f64::NEG_INFINITY, 1.0);
    for step in -20..=20 {
        let lambda = f64::from(step) / 10.0;
        let y = box_cox(x, lambda);
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let llf = -n / 2.0 * var.ln() + (lambda - 1.0) * log_sum;
        if llf.is_finite() && llf > best.0 {
            best = (llf, lambda);
        }
    }
    best.1
}

/// Arithmetic operator for generated features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "−", alias = "-")]
    Sub,
    #[serde(rename = "×", alias = "*", alias = "x")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl Operator {
    pub const ALL: [Operator; 4] = [Operator::Add, Operator::Sub, Operator::Mul, Operator::Div];

    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Add => "+",
            Operator::Sub => "−",
            Operator::Mul => "×",
            Operator::Div => "/",
        }
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Operator::Add => a + b,
            Operator::Sub => a - b,
            Operator::Mul => a * b,
            Operator::Div => a / b,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationCandidate {
    pub name: String,
    pub sources: Vec<String>,
    pub ops: Vec<Operator>,
    pub valid: bool,
    #[serde(skip)]
    pub values: Vec<f64>,
}

pub fn generated_name(sources: &[String], ops: &[Operator]) -> String {
    let mut name = sources[0].clone();
    for (op, src) in ops.iter().zip(&sources[1..]) {
        name.push_str(op.symbol());
        name.push_str(src);
    }
    name
}

/// Evaluates the chain strictly left to right, no precedence.
pub fn evaluate_chain(columns: &[&[f64]], ops: &[Operator]) -> Vec<f64> {
    let mut acc = columns[0].to_vec();
    for (op, col) in ops.iter().zip(&columns[1..]) {
        for (a, b) in acc.iter_mut().zip(col.iter()) {
            *a = op.apply(*a, *b);
        }
    }
    acc
}

/// Evaluates one operator chain over existing columns.
pub fn build_candidate(dataset: &Dataset, sources: Vec<String>, ops: Vec<Operator>) -> Result<GenerationCandidate> {
    if !(2..=3).contains(&sources.len()) {
        return Err(Error::SelectionSize(sources.len()));
    }
    if ops.len() + 1 != sources.len() {
        return Err(Error::InvalidRequest(format!(
            "{} sources need {} operators, got {}",
            sources.len(),
            sources.len() - 1,
            ops.len()
        )));
    }
    let cols = sources
        .iter()
        .map(|s| dataset.values(s).map(|v| &v[..]))
        .collect::<Result<Vec<_>>>()?;
    let values = evaluate_chain(&cols, &ops);
    Ok(GenerationCandidate {
        name: generated_name(&sources, &ops),
        valid: values.iter().all(|v| v.is_finite()),
        sources,
        ops,
        values,
    })
}

/// All arithmetic combinations of two or three active features.
///
/// Two features yield exactly six candidates: `A+B, A×B, A−B, B−A, A/B,
/// B/A`. Three features yield every ordering combined with every operator
/// pair, after dropping value-duplicates (keeping the lexicographically
/// smallest name). Candidates with any non-finite value are kept but marked
/// invalid.
pub fn generate_candidates(dataset: &Dataset, selected: &[&str]) -> Result<Vec<GenerationCandidate>> {
    if !(2..=3).contains(&selected.len()) {
        return Err(Error::SelectionSize(selected.len()));
    }
    for s in selected {
        if !dataset.is_active(s)? {
            return Err(Error::InvalidRequest(format!("feature `{s}` is not active")));
        }
    }
    let names: Vec<String> = selected.iter().map(|s| (*s).to_owned()).collect();
    if names.len() == 2 {
        let (a, b) = (names[0].clone(), names[1].clone());
        let pairs = [
            (vec![a.clone(), b.clone()], Operator::Add),
            (vec![a.clone(), b.clone()], Operator::Mul),
            (vec![a.clone(), b.clone()], Operator::Sub),
            (vec![b.clone(), a.clone()], Operator::Sub),
            (vec![a.clone(), b.clone()], Operator::Div),
            (vec![b, a], Operator::Div),
        ];
        return pairs
            .into_iter()
            .map(|(src, op)| build_candidate(dataset, src, vec![op]))
            .collect();
    }

    const ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut raw = Vec::with_capacity(96);
    for order in ORDERS {
        for o1 in Operator::ALL {
            for o2 in Operator::ALL {
                let sources = order.iter().map(|&i| names[i].clone()).collect();
                raw.push(build_candidate(dataset, sources, vec![o1, o2])?);
            }
        }
    }
    Ok(dedupe(raw))
}

fn same_values(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0))
}

fn dedupe(raw: Vec<GenerationCandidate>) -> Vec<GenerationCandidate> {
    let mut keep = vec![true; raw.len()];
    for i in 0..raw.len() {
        if !keep[i] || !raw[i].valid {
            continue;
        }
        for j in i + 1..raw.len() {
            if keep[j] && raw[j].valid && same_values(&raw[i].values, &raw[j].values) {
                // the lexicographically larger name goes
                if raw[j].name < raw[i].name {
                    keep[i] = false;
                    break;
                }
                keep[j] = false;
            }
        }
    }
    raw.into_iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c).collect()
}

/// Adds a valid candidate as an active column. Sources stay active.
pub fn adopt_candidate(dataset: &Dataset, candidate: &GenerationCandidate) -> Result<Dataset> {
    let cols = candidate
        .sources
        .iter()
        .map(|s| dataset.values(s).map(|v| &v[..]))
        .collect::<Result<Vec<_>>>()?;
    if candidate.ops.len() + 1 != cols.len() || !(2..=3).contains(&cols.len()) {
        return Err(Error::InvalidRequest(format!(
            "candidate `{}` needs 2 or 3 sources and one operator between each",
            candidate.name
        )));
    }
    let values = evaluate_chain(&cols, &candidate.ops);
    if !candidate.valid || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCandidate(candidate.name.clone()));
    }
    let descriptor = FeatureDescriptor {
        name: generated_name(&candidate.sources, &candidate.ops),
        lineage: Lineage::Generated {
            sources: candidate.sources.clone(),
            ops: candidate.ops.clone(),
        },
        active: true,
    };
    dataset.add_feature(descriptor, values)
}

/// Recomputes an engineered column from its sources.
pub fn recompute(dataset: &Dataset, descriptor: &FeatureDescriptor) -> Result<Vec<f64>> {
    match &descriptor.lineage {
        Lineage::Original => Ok(dataset.values(&descriptor.name)?.to_vec()),
        Lineage::Transformed { source, transform } => {
            Ok(TransformKind::from_id(transform)?.apply(dataset.values(source)?))
        }
        Lineage::Generated { sources, ops } => {
            let cols = sources
                .iter()
                .map(|s| dataset.values(s).map(|v| &v[..]))
                .collect::<Result<Vec<_>>>()?;
            Ok(evaluate_chain(&cols, ops))
        }
    }
}
