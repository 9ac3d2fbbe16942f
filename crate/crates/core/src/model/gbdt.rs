//! Multi-class gradient-boosted decision trees.
//!
//! Softmax objective with one regression tree per class per round. Trees
//! grow level by level using exact greedy split search over presorted
//! feature values. Each level scans every sampled feature's sorted rows
//! once, then partitions them by child so rows in finished leaves drop out.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, HyperParams, Learner};
use crate::error::{Error, Result};

/// L2 penalty on leaf weights.
pub const LAMBDA: f64 = 1.0;
/// Minimum hessian sum in each child of a split.
pub const MIN_CHILD_WEIGHT: f64 = 1.0;

const HESSIAN_FLOOR: f64 = 1e-16;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TreeNode {
    /// `NONE` for leaves.
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    #[inline]
    fn leaf_value(&self, columns: &[&[f64]], row: usize) -> f64 {
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.feature == NONE {
                return node.value;
            }
            idx = if columns[node.feature as usize][row] < node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }
}

/// Fitted boosted ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbdtClassifier {
    n_classes: usize,
    n_features: usize,
    learning_rate: f64,
    /// `trees[round * n_classes + class]`
    trees: Vec<Tree>,
    split_gain: Vec<f64>,
}

impl GbdtClassifier {
    pub fn n_rounds(&self) -> usize {
        self.trees.len() / self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Total split gain attributed to each feature over all trees.
    pub fn impurity_importance(&self) -> Vec<f64> {
        self.split_gain.clone()
    }

    fn margins(&self, columns: &[&[f64]], row: usize) -> Vec<f64> {
        let mut margins = vec![0.0; self.n_classes];
        for (i, tree) in self.trees.iter().enumerate() {
            margins[i % self.n_classes] += self.learning_rate * tree.leaf_value(columns, row);
        }
        margins
    }
}

impl Classifier for GbdtClassifier {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, columns: &[&[f64]], row: usize) -> Vec<f64> {
        let mut m = self.margins(columns, row);
        softmax_in_place(&mut m);
        m
    }
}

fn softmax_in_place(m: &mut [f64]) {
    let max = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in m.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in m.iter_mut() {
        *v /= sum;
    }
}

/// Trains [`GbdtClassifier`]s with fixed hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbdtLearner {
    pub params: HyperParams,
}

impl GbdtLearner {
    pub fn new(params: HyperParams) -> Self {
        Self { params }
    }
}

impl Learner for GbdtLearner {
    type Model = GbdtClassifier;

    fn fit(
        &self,
        columns: &[&[f64]],
        target: &[usize],
        n_classes: usize,
        rows: &[usize],
        seed: u64,
    ) -> Result<GbdtClassifier> {
        train_gbdt(columns, target, n_classes, rows, &self.params, seed)
    }
}

/// Fits a softmax boosted-tree ensemble on `rows` of a column-major table.
pub fn train_gbdt(
    columns: &[&[f64]],
    target: &[usize],
    n_classes: usize,
    rows: &[usize],
    params: &HyperParams,
    seed: u64,
) -> Result<GbdtClassifier> {
    params.validate()?;
    if columns.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    if rows.len() < 2 {
        return Err(Error::InvalidRequest("need at least two training rows".into()));
    }
    let mut present = vec![false; n_classes];
    for &r in rows {
        *present.get_mut(target[r]).ok_or(Error::UnknownClass(target[r]))? = true;
    }
    let n_present = present.iter().filter(|&&p| p).count();
    if n_present < 2 {
        return Err(Error::TooFewClasses(n_present));
    }

    let n = rows.len();
    let n_features = columns.len();
    let k = n_classes;

    // Local row i refers to rows[i]; per-feature orderings of local rows.
    let local: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| rows.iter().map(|&r| c[r]).collect())
        .collect();
    let sorted: Vec<Vec<u32>> = local
        .iter()
        .map(|vals| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| vals[a as usize].total_cmp(&vals[b as usize]));
            order
        })
        .collect();
    let labels: Vec<usize> = rows.iter().map(|&r| target[r]).collect();
    let local_refs: Vec<&[f64]> = local.iter().map(|c| &c[..]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sub = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols = ((params.colsample * n_features as f64).round() as usize).clamp(1, n_features);

    let mut margins = vec![0.0; n * k];
    let mut probs = vec![0.0; n * k];
    // (gradient, hessian) per local row
    let mut gh = vec![(0.0, 0.0); n];
    let mut in_sample = vec![true; n];
    let mut trees = Vec::with_capacity(params.n_trees * k);
    let mut split_gain = vec![0.0; n_features];
    let mut grower = Grower::new(n, params.max_depth);

    for _ in 0..params.n_trees {
        for i in 0..n {
            let p = &mut probs[i * k..(i + 1) * k];
            p.copy_from_slice(&margins[i * k..(i + 1) * k]);
            softmax_in_place(p);
        }
        if n_sub < n {
            in_sample.iter_mut().for_each(|s| *s = false);
            for i in sample(&mut rng, n, n_sub) {
                in_sample[i] = true;
            }
        }
        let mut features: Vec<usize> = if n_cols < n_features {
            sample(&mut rng, n_features, n_cols).into_vec()
        } else {
            (0..n_features).collect()
        };
        features.sort_unstable();
        let round_order: Vec<Vec<u32>> = features
            .iter()
            .map(|&f| sorted[f].iter().copied().filter(|&i| in_sample[i as usize]).collect())
            .collect();

        for class in 0..k {
            for i in 0..n {
                let p = probs[i * k + class];
                let y = if labels[i] == class { 1.0 } else { 0.0 };
                gh[i] = (p - y, (2.0 * p * (1.0 - p)).max(HESSIAN_FLOOR));
            }
            let tree = grower.grow(&local, &round_order, &features, &gh, &mut split_gain);
            for i in 0..n {
                margins[i * k + class] += params.learning_rate * tree.leaf_value(&local_refs, i);
            }
            trees.push(tree);
        }
    }

    Ok(GbdtClassifier {
        n_classes: k,
        n_features,
        learning_rate: params.learning_rate,
        trees,
        split_gain,
    })
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    /// Sum of the two children's scores.
    total: f64,
    /// Index into the sampled feature list.
    slot: usize,
    threshold: f64,
    /// Rows going left, a prefix of the node's sorted segment.
    n_left: usize,
    gl: f64,
    hl: f64,
}

/// A frontier node and its contiguous segment in every sorted order.
#[derive(Clone, Copy)]
struct Segment {
    node: u32,
    start: usize,
    end: usize,
    g: f64,
    h: f64,
}

const LEFT: u8 = 0;
const RIGHT: u8 = 1;
const DROP: u8 = 2;

/// Scratch buffers for level-wise tree growth, reused across trees.
///
/// For every sampled feature, `order` holds the in-sample rows of the
/// frontier nodes grouped by node and sorted by value within each group;
/// `values` holds the matching feature values. Rows of finished leaves are
/// dropped after each level.
struct Grower {
    max_depth: usize,
    order: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
    scratch_order: Vec<u32>,
    scratch_values: Vec<f64>,
    right_order: Vec<u32>,
    right_values: Vec<f64>,
    side: Vec<u8>,
}

impl Grower {
    fn new(n: usize, max_depth: usize) -> Self {
        Self {
            max_depth,
            order: Vec::new(),
            values: Vec::new(),
            scratch_order: Vec::with_capacity(n),
            scratch_values: Vec::with_capacity(n),
            right_order: Vec::with_capacity(n),
            right_values: Vec::with_capacity(n),
            side: vec![DROP; n],
        }
    }

    /// Grows one tree. `round_order[j]` lists the in-sample rows sorted by
    /// feature `features[j]`.
    fn grow(
        &mut self,
        local: &[Vec<f64>],
        round_order: &[Vec<u32>],
        features: &[usize],
        gh: &[(f64, f64)],
        split_gain: &mut [f64],
    ) -> Tree {
        self.order.resize_with(features.len(), Vec::new);
        self.values.resize_with(features.len(), Vec::new);
        for (j, &f) in features.iter().enumerate() {
            self.order[j].clear();
            self.order[j].extend_from_slice(&round_order[j]);
            self.values[j].clear();
            self.values[j].extend(round_order[j].iter().map(|&i| local[f][i as usize]));
        }

        let (mut g_root, mut h_root) = (0.0, 0.0);
        for &i in &self.order[0] {
            let (g, h) = gh[i as usize];
            g_root += g;
            h_root += h;
        }
        let mut nodes = vec![leaf(leaf_weight(g_root, h_root))];
        let mut segments = Vec::new();
        if h_root >= 2.0 * MIN_CHILD_WEIGHT {
            segments.push(Segment {
                node: 0,
                start: 0,
                end: self.order[0].len(),
                g: g_root,
                h: h_root,
            });
        }

        for _depth in 0..self.max_depth {
            if segments.is_empty() {
                break;
            }
            let mut best: Vec<Option<Candidate>> = vec![None; segments.len()];
            for j in 0..features.len() {
                let order = &self.order[j];
                let values = &self.values[j];
                for (seg, best) in segments.iter().zip(best.iter_mut()) {
                    let parent = score(seg.g, seg.h);
                    // Children score sum to beat; avoids divisions in the scan.
                    let mut bar = best.map_or(parent, |b| b.total);
                    let (mut gl, mut hl) = (0.0, 0.0);
                    let mut last = values[seg.start];
                    let rows = &order[seg.start..seg.end];
                    let vals = &values[seg.start..seg.end];
                    for (p, (&i, &v)) in rows.iter().zip(vals).enumerate() {
                        if v > last && hl >= MIN_CHILD_WEIGHT {
                            let (gr, hr) = (seg.g - gl, seg.h - hl);
                            let (dl, dr) = (hl + LAMBDA, hr + LAMBDA);
                            if hr >= MIN_CHILD_WEIGHT && gl * gl * dr + gr * gr * dl > bar * dl * dr {
                                let total = score(gl, hl) + score(gr, hr);
                                let gain = 0.5 * (total - parent);
                                if gain > 0.0 && best.map_or(true, |b| gain > b.gain) {
                                    let mid = last + (v - last) / 2.0;
                                    bar = total;
                                    *best = Some(Candidate {
                                        gain,
                                        total,
                                        slot: j,
                                        threshold: if mid <= last { v } else { mid },
                                        n_left: p,
                                        gl,
                                        hl,
                                    });
                                }
                            }
                        }
                        let (g, h) = gh[i as usize];
                        gl += g;
                        hl += h;
                        last = v;
                    }
                }
            }

            let mut next = Vec::new();
            let mut child_len = Vec::new();
            for (seg, cand) in segments.iter().zip(&best) {
                let rows = &self.order[0][seg.start..seg.end];
                let Some(c) = cand else {
                    for &i in rows {
                        self.side[i as usize] = DROP;
                    }
                    child_len.push((0, 0));
                    continue;
                };
                let (gr, hr) = (seg.g - c.gl, seg.h - c.hl);
                let left = nodes.len() as u32;
                nodes.push(leaf(leaf_weight(c.gl, c.hl)));
                nodes.push(leaf(leaf_weight(gr, hr)));
                let parent = &mut nodes[seg.node as usize];
                parent.feature = features[c.slot] as u32;
                parent.threshold = c.threshold;
                parent.left = left;
                parent.right = left + 1;
                split_gain[features[c.slot]] += c.gain;

                let keep_left = c.hl >= 2.0 * MIN_CHILD_WEIGHT;
                let keep_right = hr >= 2.0 * MIN_CHILD_WEIGHT;
                let chosen = &self.order[c.slot][seg.start..seg.end];
                for (p, &i) in chosen.iter().enumerate() {
                    self.side[i as usize] = match (p < c.n_left, keep_left, keep_right) {
                        (true, true, _) => LEFT,
                        (false, _, true) => RIGHT,
                        _ => DROP,
                    };
                }
                let n_right = seg.end - seg.start - c.n_left;
                child_len.push((
                    if keep_left { c.n_left } else { 0 },
                    if keep_right { n_right } else { 0 },
                ));
                if keep_left {
                    next.push((left, c.gl, c.hl));
                }
                if keep_right {
                    next.push((left + 1, gr, hr));
                }
            }
            if next.is_empty() {
                break;
            }

            // Stable partition of every order: left rows, then right rows,
            // segment by segment; dropped rows disappear.
            for j in 0..features.len() {
                let (order, values) = (&self.order[j], &self.values[j]);
                self.scratch_order.clear();
                self.scratch_values.clear();
                for seg in &segments {
                    self.right_order.clear();
                    self.right_values.clear();
                    for p in seg.start..seg.end {
                        let i = order[p];
                        match self.side[i as usize] {
                            LEFT => {
                                self.scratch_order.push(i);
                                self.scratch_values.push(values[p]);
                            }
                            RIGHT => {
                                self.right_order.push(i);
                                self.right_values.push(values[p]);
                            }
                            _ => {}
                        }
                    }
                    self.scratch_order.extend_from_slice(&self.right_order);
                    self.scratch_values.extend_from_slice(&self.right_values);
                }
                std::mem::swap(&mut self.order[j], &mut self.scratch_order);
                std::mem::swap(&mut self.values[j], &mut self.scratch_values);
            }

            let mut start = 0;
            let mut next_iter = next.into_iter();
            let mut new_segments = Vec::new();
            for (nl, nr) in child_len {
                for len in [nl, nr] {
                    if len > 0 {
                        let (node, g, h) = next_iter.next().expect("child per kept segment");
                        new_segments.push(Segment {
                            node,
                            start,
                            end: start + len,
                            g,
                            h,
                        });
                        start += len;
                    }
                }
            }
            segments = new_segments;
        }
        Tree { nodes }
    }
}

fn leaf(value: f64) -> TreeNode {
    TreeNode {
        feature: NONE,
        threshold: 0.0,
        left: NONE,
        right: NONE,
        value,
    }
}

#[inline]
fn score(g: f64, h: f64) -> f64 {
    g * g / (h + LAMBDA)
}

#[inline]
fn leaf_weight(g: f64, h: f64) -> f64 {
    -g / (h + LAMBDA)
}
