use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use roadsignal::classify::{llda_train, train_binary, Kernel, LldaParams, SvmParams};
use roadsignal::eval::wilcoxon_signed_rank;
use roadsignal::geocode::{street_similarity, Gazetteer};
use roadsignal::reduce::{SvdMethod, TruncatedBasis};
use roadsignal_bench::{binary_problem, random_matrix, random_sparse, street_names, topic_docs};

fn similarity(c: &mut Criterion) {
    let names = street_names(200, 1);
    c.bench_function("street_similarity", |b| {
        b.iter(|| black_box(street_similarity(black_box("Bronx River Pkwy Sb"), black_box(&names[7]))))
    });
    let gaz = Gazetteer::new(names.iter().map(|n| (n.clone(), "BRONX".to_string())).collect(), vec![]).unwrap();
    c.bench_function("gazetteer_lookup_200", |b| b.iter(|| black_box(gaz.lookup(black_box("Grand Ave"), 80.0))));
}

fn svm(c: &mut Criterion) {
    let mut g = c.benchmark_group("svm_train");
    for n in [100, 400] {
        let (x, y) = binary_problem(n, 20, 2);
        for kernel in [Kernel::Linear, Kernel::Rbf { gamma: 0.1 }] {
            let params = SvmParams::new(kernel, 1.0);
            g.bench_with_input(BenchmarkId::new(kernel.name(), n), &n, |b, _| {
                b.iter(|| train_binary(&x, &y, &params).unwrap())
            });
        }
    }
    g.finish();
}

fn tsvd(c: &mut Criterion) {
    let dense = random_matrix(200, 150, 3);
    c.bench_function("tsvd_dense_200x150_r20", |b| b.iter(|| TruncatedBasis::fit_dense(&dense, 20).unwrap()));
    let sparse = random_sparse(2000, 3000, 8, 4);
    c.bench_function("tsvd_randomized_2000x3000_r50", |b| {
        b.iter(|| TruncatedBasis::fit(&sparse, 50, SvdMethod::Randomized { seed: 1 }).unwrap())
    });
}

fn llda(c: &mut Criterion) {
    let (docs, labels) = topic_docs(60);
    let sets: Vec<Vec<usize>> = labels.iter().map(|&l| vec![l]).collect();
    let topics: Vec<String> = (0..5).map(|k| format!("t{k}")).collect();
    c.bench_function("llda_train_300_docs", |b| {
        b.iter(|| llda_train(&docs, &sets, &topics, LldaParams::default()).unwrap())
    });
    let model = llda_train(&docs, &sets, &topics, LldaParams::default()).unwrap();
    c.bench_function("llda_infer", |b| b.iter(|| black_box(model.infer(black_box(&docs[3])))));
}

fn wilcoxon(c: &mut Criterion) {
    let a: Vec<f64> = (0..15).map(|i| 90.0 + (i * 7 % 11) as f64 * 0.3).collect();
    let b: Vec<f64> = (0..15).map(|i| 90.0 + (i * 5 % 13) as f64 * 0.25).collect();
    c.bench_function("wilcoxon_exact_15", |bch| bch.iter(|| wilcoxon_signed_rank(black_box(&a), black_box(&b)).unwrap()));
    let a: Vec<f64> = (0..30).map(|i| 90.0 + (i * 7 % 11) as f64 * 0.3).collect();
    let b: Vec<f64> = (0..30).map(|i| 90.0 + (i * 5 % 13) as f64 * 0.25).collect();
    c.bench_function("wilcoxon_normal_30", |bch| bch.iter(|| wilcoxon_signed_rank(black_box(&a), black_box(&b)).unwrap()));
}

criterion_group!(benches, similarity, svm, tsvd, llda, wilcoxon);
criterion_main!(benches);
