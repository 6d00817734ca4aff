use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use varband::kernel::toy_kernel;
use varband::sampling::{SampleSet, SamplingOperator};
use varband::{BandwidthProfile, BlendShape, Interval, KernelModel, Potential, SpectralSet};

fn kernel_evaluation(c: &mut Criterion) {
    let set = SpectralSet::band(1.0).unwrap();
    let profile = BandwidthProfile::smooth_blend(1.0, 4.0, 2.0, BlendShape::Quintic).unwrap();
    let models = [
        ("free", KernelModel::free(1.0, 40.0).unwrap()),
        ("toy", KernelModel::toy(1.0, 4.0, 1.0, 40.0).unwrap()),
        ("schrodinger", KernelModel::schrodinger(Potential::square_well(-1.0, 1.0), set.clone(), 40.0).unwrap()),
        ("sl", KernelModel::liouville(&profile, set, 40.0).unwrap()),
    ];
    let mut group = c.benchmark_group("kernel");
    group.bench_function("toy_closed_form", |b| b.iter(|| toy_kernel(1.0, 4.0, 1.0, black_box(-3.2), black_box(7.1))));
    for (name, model) in &models {
        group.bench_with_input(BenchmarkId::new("exterior", name), model, |b, m| b.iter(|| m.kernel(black_box(-13.0), black_box(9.5))));
        group.bench_with_input(BenchmarkId::new("quadrature", name), model, |b, m| {
            b.iter(|| m.kernel_quadrature(black_box(0.3), black_box(-0.4)))
        });
    }
    group.finish();
}

fn gram_assembly(c: &mut Criterion) {
    let model = KernelModel::free(1.0, 40.0).unwrap();
    let mut group = c.benchmark_group("gram");
    group.sample_size(10);
    for n in [32usize, 128] {
        let xs: Vec<f64> = (0..n).map(|k| -30.0 + 60.0 * k as f64 / n as f64).collect();
        group.bench_with_input(BenchmarkId::new("kernel_matrix", n), &xs, |b, xs| b.iter(|| model.kernel_matrix(xs, xs)));
    }
    let window = Interval::new(-40.0, 40.0).unwrap();
    let x = SampleSet::lattice(2.0, 0.1, window).unwrap();
    group.bench_function("sampling_operator", |b| b.iter(|| SamplingOperator::new(&model, &x, window).unwrap()));
    group.finish();
}

criterion_group!(benches, kernel_evaluation, gram_assembly);
criterion_main!(benches);
