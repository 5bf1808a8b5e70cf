use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use qcdeform_bench::{bench_disk, smooth_density};
use qcdeform_core::integral_ops::{beurling_pi, cauchy_t};
use qcdeform_core::{build_map, QuadratureConfig};

fn transforms(c: &mut Criterion) {
    let disk = bench_disk();
    let inside = disk.center + Complex64::new(0.05, 0.1);
    let outside = Complex64::new(0.5, 0.2);

    let mut group = c.benchmark_group("cauchy_t");
    for n_ang in [64, 128, 256] {
        let rho = smooth_density(QuadratureConfig { n_rad: n_ang / 2, n_ang });
        group.bench_with_input(BenchmarkId::new("interior", n_ang), &rho, |b, rho| {
            b.iter(|| black_box(cauchy_t(rho, black_box(inside))))
        });
        group.bench_with_input(BenchmarkId::new("exterior", n_ang), &rho, |b, rho| {
            b.iter(|| black_box(cauchy_t(rho, black_box(outside))))
        });
    }
    group.finish();

    let rho = smooth_density(QuadratureConfig::default());
    c.bench_function("beurling_pi/interior", |b| b.iter(|| black_box(beurling_pi(&rho, black_box(inside)))));
    c.bench_function("build_map", |b| b.iter(|| black_box(build_map(&rho).expect("contractive"))));
}

criterion_group!(benches, transforms);
criterion_main!(benches);
