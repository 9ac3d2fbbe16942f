use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Accuracy plus support-weighted precision and recall.
///
/// Per-class precision with no predicted positives counts as 0. Classes
/// absent from `y_true` carry zero weight.
pub fn weighted_metrics(y_true: &[usize], y_pred: &[usize]) -> Result<WeightedMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::InvalidRequest("metrics need at least one instance".into()));
    }
    let k = y_true.iter().chain(y_pred).max().copied().unwrap_or(0) + 1;
    let mut tp = vec![0usize; k];
    let mut support = vec![0usize; k];
    let mut predicted = vec![0usize; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        support[t] += 1;
        predicted[p] += 1;
        if t == p {
            tp[t] += 1;
        }
    }
    let n = y_true.len() as f64;
    let mut precision = 0.0;
    let mut recall = 0.0;
    for c in 0..k {
        if support[c] == 0 {
            continue;
        }
        let w = support[c] as f64 / n;
        if predicted[c] > 0 {
            precision += w * tp[c] as f64 / predicted[c] as f64;
        }
        recall += w * tp[c] as f64 / support[c] as f64;
    }
    Ok(WeightedMetrics {
        accuracy: tp.iter().sum::<usize>() as f64 / n,
        precision,
        recall,
    })
}
