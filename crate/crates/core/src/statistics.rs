//! Guidance measures: correlations, mutual information, VIF, ANOVA F and
//! transform impact, computed per data-space slice.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureView;
use crate::engineering::TransformRegistry;
use crate::error::{Error, Result};
use crate::linalg;
use crate::numfmt;
use crate::slicing::{Scope, SlicePartition};

/// Large finite stand-in for an infinite F statistic.
pub const F_CAP: f64 = 1e12;
/// Number of equal-width bins used to discretize a feature for MI.
pub const MI_BINS: usize = 10;
pub const DEFAULT_MIN_COR: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Set when either column has zero variance; `r` is then 0.
    pub degenerate: bool,
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidRequest("correlation needs at least two values".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation { r: 0.0, degenerate: true });
    }
    Ok(Correlation {
        r: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

fn abs_cor(x: &[f64], y: &[f64]) -> f64 {
    pearson(x, y).map(|c| c.r.abs()).unwrap_or(0.0)
}

/// |Pearson r| between `x` and the one-vs-rest indicator of `class`.
pub fn per_class_correlation(x: &[f64], target: &[usize], n_classes: usize, class: usize) -> Result<f64> {
    if class >= n_classes {
        return Err(Error::UnknownClass(class));
    }
    let indicator: Vec<f64> = target.iter().map(|&t| if t == class { 1.0 } else { 0.0 }).collect();
    Ok(pearson(x, &indicator)?.r.abs())
}

/// Equal-width bin index of every value; a constant column is one bin.
pub fn equal_width_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0; x.len()];
    }
    let width = hi - lo;
    x.iter()
        .map(|&v| (((v - lo) / width * bins as f64).floor() as usize).min(bins - 1))
        .collect()
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information (nats) between `x`, discretized into ten equal-width
/// bins, and the class variable. Plug-in estimate.
pub fn mutual_information(x: &[f64], target: &[usize]) -> Result<f64> {
    if x.len() != target.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: target.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidRequest("mutual information needs at least two values".into()));
    }
    let bins = equal_width_bins(x, MI_BINS);
    let k = target.iter().max().copied().unwrap_or(0) + 1;
    let n = x.len() as f64;
    let mut joint = vec![0usize; MI_BINS * k];
    let mut bx = vec![0usize; MI_BINS];
    let mut by = vec![0usize; k];
    for (&b, &t) in bins.iter().zip(target) {
        joint[b * k + t] += 1;
        bx[b] += 1;
        by[t] += 1;
    }
    let mi = entropy(bx.into_iter(), n) + entropy(by.into_iter(), n) - entropy(joint.into_iter(), n);
    Ok(mi.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VifState {
    Severe,
    High,
    Moderate,
    Low,
}

impl VifState {
    pub fn from_vif(vif: f64) -> Self {
        if vif > 10.0 {
            VifState::Severe
        } else if vif > 5.0 {
            VifState::High
        } else if vif > 2.5 {
            VifState::Moderate
        } else {
            VifState::Low
        }
    }
}

/// Variance inflation factor of `f` against `others`, `1 / (1 − R²)` from
/// an OLS fit with intercept. `R² ≥ 1 − 1e-12` (including a constant `f`,
/// which the intercept explains completely) yields `+∞`.
pub fn vif(f: &[f64], others: &[&[f64]]) -> f64 {
    if others.is_empty() {
        return 1.0;
    }
    match linalg::r_squared(f, others) {
        None => f64::INFINITY,
        Some(r2) if r2 >= 1.0 - 1e-12 => f64::INFINITY,
        Some(r2) => (1.0 / (1.0 - r2)).max(1.0),
    }
}

/// One-way ANOVA F statistic of `x` grouped by class. Classes without
/// instances are ignored.
pub fn anova_f(x: &[f64], target: &[usize]) -> Result<f64> {
    if x.len() != target.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: target.len(),
        });
    }
    let k_max = target.iter().max().copied().unwrap_or(0) + 1;
    let mut sum = vec![0.0; k_max];
    let mut count = vec![0usize; k_max];
    for (&v, &t) in x.iter().zip(target) {
        sum[t] += v;
        count[t] += 1;
    }
    let groups = count.iter().filter(|&&c| c > 0).count();
    let n = x.len();
    if groups < 2 {
        return Err(Error::DegenerateDof(format!("{groups} non-empty group(s)")));
    }
    if n <= groups {
        return Err(Error::DegenerateDof(format!("{n} instances for {groups} groups")));
    }
    let grand = x.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let ssw: f64 = x.iter().zip(target).map(|(v, &t)| (v - means[t]).powi(2)).sum();
    let ssb: f64 = means
        .iter()
        .zip(&count)
        .map(|(m, &c)| c as f64 * (m - grand).powi(2))
        .sum();
    let df_b = (groups - 1) as f64;
    let df_w = (n - groups) as f64;
    if ssw == 0.0 {
        return Ok(if ssb > 0.0 { F_CAP } else { 0.0 });
    }
    Ok(((ssb / df_b) / (ssw / df_w)).min(F_CAP))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    #[serde(serialize_with = "numfmt::sig12")]
    pub weight: f64,
}

/// Undirected edges between features with `|r| ≥ min_cor`. Endpoints are
/// ordered by name, and edges sorted lexicographically.
pub fn feature_graph(names: &[String], columns: &[&[f64]], min_cor: f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    for i in 0..columns.len() {
        for j in i + 1..columns.len() {
            let w = abs_cor(columns[i], columns[j]);
            if w >= min_cor {
                let (a, b) = if names[i] <= names[j] { (i, j) } else { (j, i) };
                edges.push(Edge {
                    source: names[a].clone(),
                    target: names[b].clone(),
                    weight: w,
                });
            }
        }
    }
    edges.sort_by(|x, y| (&x.source, &x.target).cmp(&(&y.source, &y.target)));
    edges
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Decreases,
    Increases,
    Neutral,
}

impl Direction {
    fn of(delta: f64) -> Self {
        if delta < 0.0 {
            Direction::Decreases
        } else if delta > 0.0 {
            Direction::Increases
        } else {
            Direction::Neutral
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformDelta {
    pub transform: String,
    /// Mean over other features of `|r(t(f), g)| − |r(f, g)|`.
    #[serde(serialize_with = "numfmt::sig12")]
    pub delta: f64,
    /// Change in |correlation with the target|.
    #[serde(serialize_with = "numfmt::sig12")]
    pub target_delta: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformImpact {
    pub deltas: Vec<TransformDelta>,
    /// Majority sign over the per-transform deltas.
    pub direction: Direction,
    pub inapplicable: Vec<String>,
}

/// How each applicable transform of `f` changes its mean |correlation| with
/// the other features. All columns are restricted to the same rows.
pub fn transform_impact(
    f: &[f64],
    others: &[&[f64]],
    target: &[usize],
    registry: &TransformRegistry,
) -> TransformImpact {
    let t_target: Vec<f64> = target.iter().map(|&t| t as f64).collect();
    let base: Vec<f64> = others.iter().map(|g| abs_cor(f, g)).collect();
    let base_target = abs_cor(f, &t_target);
    let mut deltas = Vec::new();
    let mut inapplicable = Vec::new();
    for spec in registry.transforms.iter().filter(|s| s.enabled) {
        let id = spec.id.id();
        let values = match registry.transform_values("", id, f) {
            Ok(v) => v,
            Err(_) => {
                inapplicable.push(id.to_owned());
                continue;
            }
        };
        let delta = if others.is_empty() {
            0.0
        } else {
            others
                .iter()
                .zip(&base)
                .map(|(g, b)| abs_cor(&values, g) - b)
                .sum::<f64>()
                / others.len() as f64
        };
        deltas.push(TransformDelta {
            transform: id.to_owned(),
            delta,
            target_delta: abs_cor(&values, &t_target) - base_target,
            direction: Direction::of(delta),
        });
    }
    let down = deltas.iter().filter(|d| d.direction == Direction::Decreases).count();
    let up = deltas.iter().filter(|d| d.direction == Direction::Increases).count();
    let direction = match down.cmp(&up) {
        std::cmp::Ordering::Greater => Direction::Decreases,
        std::cmp::Ordering::Less => Direction::Increases,
        std::cmp::Ordering::Equal => Direction::Neutral,
    };
    TransformImpact {
        deltas,
        direction,
        inapplicable,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStatistics {
    /// |r| with the class index.
    #[serde(serialize_with = "numfmt::sig12")]
    pub target_cor: f64,
    pub target_cor_degenerate: bool,
    #[serde(serialize_with = "sig12_map")]
    pub per_class_cor: IndexMap<String, f64>,
    #[serde(serialize_with = "numfmt::sig12")]
    pub mi_target: f64,
    #[serde(serialize_with = "numfmt::sig12", deserialize_with = "de_f64_or_inf")]
    pub vif: f64,
    pub vif_state: VifState,
    #[serde(serialize_with = "sig12_map")]
    pub pairwise_cor: IndexMap<String, f64>,
}

fn sig12_map<S: serde::Serializer>(m: &IndexMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, &numfmt::Sig12(*v))?;
    }
    map.end()
}

fn de_f64_or_inf<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(de)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("bad number {t:?}"))),
    }
}

/// Statistics for one scope. `features` is absent when the scope holds
/// fewer than two instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeStatistics {
    pub n_instances: usize,
    pub features: Option<IndexMap<String, FeatureStatistics>>,
}

/// Measures for the rows `rows` of the active view.
pub fn scope_statistics(view: &FeatureView, rows: &[usize]) -> ScopeStatistics {
    if rows.len() < 2 {
        return ScopeStatistics {
            n_instances: rows.len(),
            features: None,
        };
    }
    let cols: Vec<Vec<f64>> = view.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
    let target: Vec<usize> = rows.iter().map(|&r| view.target[r]).collect();
    let target_f: Vec<f64> = target.iter().map(|&t| t as f64).collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| &c[..]).collect();
    let k = view.n_classes();

    let mut features = IndexMap::new();
    for (i, name) in view.names.iter().enumerate() {
        let x = refs[i];
        let tc = pearson(x, &target_f).expect("equal lengths");
        let per_class_cor = view
            .class_names
            .iter()
            .enumerate()
            .map(|(c, cname)| (cname.clone(), per_class_correlation(x, &target, k, c).expect("known class")))
            .collect();
        let others: Vec<&[f64]> = refs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, c)| *c).collect();
        let v = vif(x, &others);
        let pairwise_cor = view
            .names
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, other)| (other.clone(), abs_cor(x, refs[j])))
            .collect();
        features.insert(
            name.clone(),
            FeatureStatistics {
                target_cor: tc.r.abs(),
                target_cor_degenerate: tc.degenerate,
                per_class_cor,
                mi_target: mutual_information(x, &target).expect("equal lengths"),
                vif: v,
                vif_state: VifState::from_vif(v),
                pairwise_cor,
            },
        );
    }
    ScopeStatistics {
        n_instances: rows.len(),
        features: Some(features),
    }
}

/// Statistics for the whole space and every slice, keyed by scope name.
pub fn statistics_bundle(view: &FeatureView, partition: &SlicePartition) -> IndexMap<String, ScopeStatistics> {
    Scope::EVERY
        .iter()
        .map(|&scope| (scope.to_string(), scope_statistics(view, &partition.rows(scope))))
        .collect()
}

/// Feature graph restricted to the rows of one scope.
pub fn scope_graph(view: &FeatureView, rows: &[usize], min_cor: f64) -> Vec<Edge> {
    if rows.len() < 2 {
        return Vec::new();
    }
    let cols: Vec<Vec<f64>> = view.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| &c[..]).collect();
    feature_graph(&view.names, &refs, min_cor)
}
