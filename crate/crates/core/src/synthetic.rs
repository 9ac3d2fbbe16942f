//! Seeded synthetic datasets used by tests, benches and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::Result;

/// Standard normal draw (Box-Muller).
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Rank-based labelling: the `counts[0]` smallest scores get class 0, the
/// next `counts[1]` class 1, and so on.
pub fn label_by_rank(scores: &[f64], counts: &[usize]) -> Vec<usize> {
    assert_eq!(counts.iter().sum::<usize>(), scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut labels = vec![0; scores.len()];
    let mut pos = 0;
    for (class, &c) in counts.iter().enumerate() {
        for &i in &order[pos..pos + c] {
            labels[i] = class;
        }
        pos += c;
    }
    labels
}

/// Three-class data whose label is the tertile of `x1 · x2`, with
/// `n_noise` uninformative columns. Every column is strictly positive.
pub fn planted_product(n: usize, n_noise: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(0.5..2.0)).collect() };
    let x1 = draw(&mut rng);
    let x2 = draw(&mut rng);
    let mut features = vec![("x1".to_string(), x1.clone()), ("x2".to_string(), x2.clone())];
    for j in 0..n_noise {
        features.push((format!("noise{}", j + 1), draw(&mut rng)));
    }
    let product: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a * b).collect();
    let third = n / 3;
    let target = label_by_rank(&product, &[third, third, n - 2 * third]);
    Dataset::new(
        features,
        "class",
        target,
        vec!["low".into(), "mid".into(), "high".into()],
    )
}

/// Quality counts of the red-wine data, grades 3 through 8.
pub const WINE_QUALITY_COUNTS: [(u32, usize); 6] = [(3, 10), (4, 53), (5, 681), (6, 638), (7, 199), (8, 18)];

pub const WINE_COLUMNS: [&str; 11] = [
    "fixed acidity",
    "volatile acidity",
    "citric acid",
    "residual sugar",
    "chlorides",
    "free sulfur dioxide",
    "total sulfur dioxide",
    "density",
    "pH",
    "sulphates",
    "alcohol",
];

/// Wine-like surrogate: 1,599 rows, eleven strictly positive physicochemical
/// columns with realistic scales and correlations, and a `quality` grade
/// with the exact red-wine grade counts. Returns header names, columns and
/// grade labels so callers can write a raw CSV.
pub fn wine_like(seed: u64) -> (Vec<String>, Vec<Vec<f64>>, Vec<String>) {
    let n: usize = WINE_QUALITY_COUNTS.iter().map(|c| c.1).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = |rng: &mut ChaCha8Rng| std_normal(rng);

    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 11];
    let mut score = Vec::with_capacity(n);
    for _ in 0..n {
        let acid = z(&mut rng);
        let sulfur = z(&mut rng);
        let alc = z(&mut rng);
        let va = z(&mut rng);
        let sul = z(&mut rng);

        let fixed = (2.08 + 0.2 * acid + 0.05 * z(&mut rng)).exp();
        let volatile = (-0.7 + 0.3 * va).exp();
        let citric = (0.27 + 0.15 * acid - 0.08 * va + 0.1 * z(&mut rng)).max(0.0) + 0.005;
        let sugar = (0.85 + 0.35 * z(&mut rng)).exp();
        let chlorides = (-2.5 + 0.3 * z(&mut rng) - 0.05 * sul).exp();
        let free = (2.6 + 0.6 * sulfur + 0.2 * z(&mut rng)).exp();
        let total = (3.6 + 0.55 * sulfur + 0.3 * z(&mut rng)).exp();
        let density = 0.9967 + 0.0012 * acid - 0.0009 * alc + 0.0008 * z(&mut rng);
        let ph = 3.31 - 0.12 * acid + 0.08 * z(&mut rng);
        let sulphates = (-0.44 + 0.18 * sul).exp();
        let alcohol = 10.4 + 1.0 * alc + 0.1 * z(&mut rng).abs();

        for (c, v) in cols.iter_mut().zip([
            fixed, volatile, citric, sugar, chlorides, free, total, density, ph, sulphates, alcohol,
        ]) {
            c.push(v);
        }
        score.push(1.0 * alc - 0.6 * va + 0.45 * sul + 0.15 * acid - 0.1 * sulfur + 0.75 * z(&mut rng));
    }

    let counts: Vec<usize> = WINE_QUALITY_COUNTS.iter().map(|c| c.1).collect();
    let grades = label_by_rank(&score, &counts)
        .into_iter()
        .map(|g| WINE_QUALITY_COUNTS[g].0.to_string())
        .collect();
    (WINE_COLUMNS.iter().map(|s| s.to_string()).collect(), cols, grades)
}
