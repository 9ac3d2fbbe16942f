use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use featlab_bench::{params, wine_dataset};
use featlab_core::model::{cross_validate, train_gbdt};
use featlab_core::slicing::slice;
use featlab_core::statistics::{mutual_information, pearson, statistics_bundle, vif};
use featlab_core::{SearchBudget, SliceThresholds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gbdt(c: &mut Criterion) {
    let view = wine_dataset(1).active_view();
    let cols = view.column_refs();
    let rows: Vec<usize> = (0..view.n_rows()).collect();
    let mut group = c.benchmark_group("gbdt");
    group.sample_size(10);
    for depth in [6, 12] {
        let p = params(100, depth);
        group.bench_function(format!("fit_100_trees_depth_{depth}"), |b| {
            b.iter(|| train_gbdt(black_box(&cols), &view.target, 3, &rows, &p, 7).unwrap())
        });
    }
    group.finish();
}

fn cv(c: &mut Criterion) {
    let view = wine_dataset(2).active_view();
    let budget = SearchBudget::default();
    let p = params(50, 6);
    let mut group = c.benchmark_group("cv");
    group.sample_size(10);
    group.bench_function("8_fold_50_trees", |b| b.iter(|| cross_validate(black_box(&view), &p, &budget).unwrap()));
    group.finish();
}

fn statistics(c: &mut Criterion) {
    let view = wine_dataset(3).active_view();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let probs: Vec<f64> = (0..view.n_rows()).map(|_| rng.gen()).collect();
    let partition = slice(&probs, &SliceThresholds::default()).unwrap();
    let y: Vec<f64> = view.target.iter().map(|&t| t as f64).collect();
    let others: Vec<&[f64]> = view.columns[1..].iter().map(|c| &c[..]).collect();

    let mut group = c.benchmark_group("statistics");
    group.bench_function("pearson", |b| b.iter(|| pearson(black_box(&view.columns[0]), &y).unwrap()));
    group.bench_function("mutual_information", |b| {
        b.iter(|| mutual_information(black_box(&view.columns[0]), &view.target).unwrap())
    });
    group.bench_function("vif_10_others", |b| b.iter(|| vif(black_box(&view.columns[0]), &others)));
    group.sample_size(20);
    group.bench_function("bundle_all_scopes", |b| b.iter(|| statistics_bundle(black_box(&view), &partition)));
    group.finish();
}

criterion_group!(benches, gbdt, cv, statistics);
criterion_main!(benches);
