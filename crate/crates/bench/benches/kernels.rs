use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hdclass_bench::{binary_response, fixture};
use hdclass_core::glm::{univariate_slope_batch, Family, GlmOptions};
use hdclass_core::harness::{cross_validate, stratified_kfold, Method, PipelineSpec};
use hdclass_core::kma::{fit_kma, gram, median_pairwise_distance, KernelSpec};
use hdclass_core::plsglr::{extract_components, ExtractOptions};
use hdclass_core::select::bss_wss_ranking;
use nalgebra::DMatrix;

fn slopes(c: &mut Criterion) {
    let mut group = c.benchmark_group("univariate_slopes");
    for p in [500, 2000] {
        let d = fixture(62, p);
        let y = binary_response(&d);
        let controls = DMatrix::<f64>::zeros(62, 0);
        group.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, _| {
            b.iter(|| univariate_slope_batch(black_box(&d.x), &controls, &y, Family::Binomial, &GlmOptions::default()))
        });
    }
    group.finish();
}

fn plsglr(c: &mut Criterion) {
    let d = fixture(62, 2000);
    let y = binary_response(&d);
    let opts = ExtractOptions::default();
    c.bench_function("plsglr_extract_m3", |b| {
        b.iter(|| extract_components(black_box(&d.x), &y, 3, &opts))
    });
}

fn kernel(c: &mut Criterion) {
    let d = fixture(62, 2000);
    let x = d.x.values().clone();
    let sigma = median_pairwise_distance(&x).expect("distinct samples");
    let rbf = KernelSpec::Rbf { sigma };
    c.bench_function("rbf_gram_62x2000", |b| b.iter(|| gram(black_box(&x), &x, &rbf)));
    c.bench_function("kma_fit_62x2000", |b| b.iter(|| fit_kma(black_box(&x), &d.y, rbf, 1.0, 0.1)));
}

fn ranking(c: &mut Criterion) {
    let d = fixture(62, 2000);
    c.bench_function("bss_wss_2000", |b| b.iter(|| bss_wss_ranking(black_box(&d))));
}

fn cross_validation(c: &mut Criterion) {
    let d = fixture(62, 500);
    let folds = stratified_kfold(&d.y, 10, 1).expect("enough samples per class");
    let mut group = c.benchmark_group("cv10");
    group.sample_size(10);
    for method in [Method::Knn, Method::Kma, Method::PlsGlrLog] {
        let spec = PipelineSpec::new(method);
        group.bench_function(method.label(), |b| b.iter(|| cross_validate(black_box(&d), &spec, &folds)));
    }
    group.finish();
}

criterion_group!(benches, slopes, plsglr, kernel, ranking, cross_validation);
criterion_main!(benches);
