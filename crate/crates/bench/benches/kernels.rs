use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kspace_bench::{batch, image, points};
use kspace_core::model::{conv2d, init_params, training_step, Architecture};
use kspace_core::numerics::Tensor;
use kspace_core::spectral::fft2;
use kspace_core::umap::knn;
use kspace_core::InputMode;

fn bench_fft2(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft2");
    for size in [32, 64, 128] {
        let img = image(size, 1);
        group.bench_with_input(BenchmarkId::from_parameter(size), &img, |b, img| {
            b.iter(|| fft2(black_box(img)).unwrap())
        });
    }
    group.finish();
}

fn bench_conv(c: &mut Criterion) {
    let (input, _) = batch(8, 16, 32, 2);
    let kernels = points(32 * 16 * 9, 1, 3).reshape(&[32, 16, 3, 3]).unwrap();
    let bias = Tensor::zeros(&[32]);
    c.bench_function("conv2d 8x16x32x32 -> 32", |b| {
        b.iter(|| conv2d(black_box(&input), &kernels, &bias).unwrap())
    });
}

fn bench_training_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("training_step");
    group.sample_size(10);
    for mode in [InputMode::Control, InputMode::Experimental] {
        let params = init_params(mode, Architecture::default(), 64, 4).unwrap();
        let (inputs, labels) = batch(32, mode.channels(), 64, 5);
        group.bench_function(mode.as_str(), |b| {
            b.iter(|| training_step(&params, black_box(&inputs), &labels).unwrap())
        });
    }
    group.finish();
}

fn bench_knn(c: &mut Criterion) {
    let pts = points(400, 128, 6);
    c.bench_function("knn 400x128 k=15", |b| b.iter(|| knn(black_box(&pts), 15).unwrap()));
}

criterion_group!(benches, bench_fft2, bench_conv, bench_training_step, bench_knn);
criterion_main!(benches);
