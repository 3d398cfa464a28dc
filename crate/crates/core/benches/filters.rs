//! Filters and the full per-image analysis on one thread versus the whole pool.
//!
//! Without the `parallel` feature only the sequential variants run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sma_core::filters::{gaussian_blur, median_filter, nlm_denoise, tubeness, FilterParams};
use sma_core::frequency::{fft2, ifft2};
use sma_core::orientation::dominant_orientation;
use sma_core::pipeline::{analyze_image, AnalysisConfig, CropMode};
use sma_core::validation::{generate_phantom, PhantomSpec};
use sma_core::GrayImage;

fn phantom(size: usize) -> GrayImage {
    let spec = PhantomSpec {
        width: size,
        height: size,
        gap_at_right: size as f64 * 0.45,
        ..Default::default()
    };
    generate_phantom(&spec).expect("valid phantom").0
}

type Job<'a> = &'a mut (dyn FnMut() + Send);
type Runner = Box<dyn Fn(Job)>;

/// `(label, runner)` pairs: each runner executes a job on its own pool.
fn runners() -> Vec<(&'static str, Runner)> {
    #[cfg(feature = "parallel")]
    {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        vec![
            ("sequential", Box::new(move |f: Job| one.install(f))),
            ("parallel", Box::new(|f: Job| f())),
        ]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential", Box::new(|f: Job| f()))]
    }
}

fn bench_filters(c: &mut Criterion) {
    let params = FilterParams::default();
    for size in [256, 512] {
        let img = phantom(size);
        let mut group = c.benchmark_group(format!("filters/{size}"));
        group.sample_size(10);
        for (label, run) in runners() {
            group.bench_function(BenchmarkId::new("gaussian", label), |b| {
                b.iter(|| run(&mut || drop(black_box(gaussian_blur(&img, 3.0)))))
            });
            group.bench_function(BenchmarkId::new("median", label), |b| {
                b.iter(|| run(&mut || drop(black_box(median_filter(&img, 2)))))
            });
            group.bench_function(BenchmarkId::new("tubeness", label), |b| {
                b.iter(|| run(&mut || drop(black_box(tubeness(&img, 4.0)))))
            });
            group.bench_function(BenchmarkId::new("nlm", label), |b| {
                b.iter(|| run(&mut || drop(black_box(nlm_denoise(&img, &params)))))
            });
            group.bench_function(BenchmarkId::new("fft_roundtrip", label), |b| {
                b.iter(|| run(&mut || drop(black_box(ifft2(&fft2(&img))))))
            });
            group.bench_function(BenchmarkId::new("structure_tensor", label), |b| {
                b.iter(|| run(&mut || drop(black_box(dominant_orientation(&img, 3.0)))))
            });
        }
        group.finish();
    }
}

fn bench_analysis(c: &mut Criterion) {
    let img = phantom(512);
    let cfg = AnalysisConfig {
        crop: CropMode::None,
        ..Default::default()
    };
    let mut group = c.benchmark_group("analyze/512");
    group.sample_size(10);
    for (label, run) in runners() {
        group.bench_function(label, |b| {
            b.iter(|| run(&mut || drop(black_box(analyze_image(&img, "bench", &cfg)))))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_filters, bench_analysis);
criterion_main!(benches);
