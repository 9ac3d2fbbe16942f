//! Benchmark fixtures.

use featlab_core::synthetic::wine_like;
use featlab_core::{Dataset, HyperParams};

/// The wine-like surrogate with grades grouped into low / medium / high.
pub fn wine_dataset(seed: u64) -> Dataset {
    let (names, cols, grades) = wine_like(seed);
    let target = grades
        .iter()
        .map(|g| match g.as_str() {
            "3" | "4" => 0,
            "5" | "6" => 1,
            _ => 2,
        })
        .collect();
    Dataset::new(
        names.into_iter().zip(cols).collect(),
        "quality",
        target,
        vec!["low".into(), "medium".into(), "high".into()],
    )
    .expect("surrogate is well formed")
}

pub fn params(n_trees: usize, max_depth: usize) -> HyperParams {
    HyperParams {
        n_trees,
        learning_rate: 0.1,
        max_depth,
        subsample: 0.9,
        colsample: 0.9,
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_has_wine_shape() {
        let ds = super::wine_dataset(0);
        assert_eq!(ds.class_counts(), vec![63, 1319, 217]);
        assert_eq!(ds.n_features(), 11);
    }
}
