//! Criterion benches comparing the rayon-backed reductions (default
//! `parallel` feature) against the sequential reference paths, on the
//! workloads that dominate the library: tensor-product quadrature of the
//! extremal integrands and eigensolver sweeps.
//!
//! The two paths share the chunked summation order, so they agree bitwise;
//! the benches measure the speedup only.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::f64::consts::PI;

use sobolev_strip::exec;
use sobolev_strip::quad::{AxisPartition, QuadratureRule, TensorGrid};
use sobolev_strip::*;

fn bench_chunked_sum(c: &mut Criterion) {
    let mut group = c.benchmark_group("chunked_sum");
    for n in [1 << 16, 1 << 20] {
        let term = |i: usize| {
            let x = i as f64 * 1e-6;
            (x.sin() * x.cos()).abs().powf(1.5)
        };
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| exec::chunked_sum(n, term))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| exec::chunked_sum_seq(n, term))
        });
    }
    group.finish();
}

fn bench_tensor_quadrature(c: &mut Criterion) {
    let mut group = c.benchmark_group("tensor_quadrature");
    group.sample_size(20);
    let rule = QuadratureRule::gauss_legendre(16).unwrap();
    let parts = [
        AxisPartition::uniform(-4.0 * PI, 4.0 * PI, 128).unwrap(),
        AxisPartition::uniform(0.0, PI, 64).unwrap(),
    ];
    let grid = TensorGrid::new(&parts, &rule).unwrap();
    let f = |x: &[f64]| {
        let u = (x[0] * 0.25).sin() * x[1].sin();
        u.abs().powf(1.5)
    };
    group.bench_function("parallel", |b| b.iter(|| grid.integrate_points(f)));
    group.bench_function("sequential", |b| {
        b.iter(|| {
            grid.integrate_indexed_seq(|idx| {
                f(&[grid.axis_nodes(0)[idx[0]], grid.axis_nodes(1)[idx[1]]])
            })
        })
    });
    group.finish();
}

fn bench_strip_trial_norms(c: &mut Criterion) {
    let mut group = c.benchmark_group("strip_trial_norms");
    group.sample_size(10);
    let p = PExponent::new(1.5).unwrap();
    let d = StripDomain::new(1, vec![(0.0, PI)]).unwrap();
    let u = strip_trial(&p, &d, 4.0 * PI).unwrap();
    // Tables are rebuilt inside; the integrand sweep dominates at this size.
    group.bench_function("w1p_norm_parts_res64", |b| {
        b.iter(|| u.w1p_norm_parts(64).unwrap())
    });
    group.finish();
}

fn bench_eigensolver(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigensolver");
    group.sample_size(10);
    let p = PExponent::new(2.0).unwrap();
    let rect = Rectangle::new(vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
    let opts = EigenOptions {
        tol: 1e-6,
        max_iter: 2_000,
    };
    group.bench_function("p2_grid31x31_default_pool", |b| {
        b.iter(|| first_eigenpair(&p, &rect, &[31, 31], opts).unwrap())
    });
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("p2_grid31x31_single_thread", |b| {
            b.iter(|| single.install(|| first_eigenpair(&p, &rect, &[31, 31], opts).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_chunked_sum,
    bench_tensor_quadrature,
    bench_strip_trial_norms,
    bench_eigensolver
);
criterion_main!(benches);
