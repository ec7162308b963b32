//! Benchmarks of the numerical inner loops: the dense complex sandwich that
//! dominates a conditioning step, the full propagator step, the moving-basis
//! recenter, and one particle-filter step.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use qcselect_core::linalg::{split_gemm, split_gemm_adjoint, SplitMatrix};
use qcselect_core::operators::{
    build_lindblads_shifted, build_static_hamiltonian_shifted, thermal_state, DuffingParams,
    FockDim,
};
use qcselect_core::particle::{init_ensemble, pf_step};
use qcselect_core::quantum::{QuantumFilter, QuantumFilterOptions, RouchonPropagator};
use qcselect_core::seeds::{stream_rng, StreamRole};

fn bench_split_gemm(c: &mut Criterion) {
    let mut group = c.benchmark_group("split_gemm");
    for &n in &[60usize, 80] {
        let dim = FockDim::new(n).unwrap();
        let params = DuffingParams::reference();
        let h = build_static_hamiltonian_shifted(dim, &params, 0.3, 0.1);
        let a = SplitMatrix::from_cmatrix(h.matrix());
        let rho = SplitMatrix::from_cmatrix(thermal_state(dim, 1.0).matrix());
        let mut out = SplitMatrix::zeros(n);
        group.bench_with_input(BenchmarkId::new("nn", n), &n, |b, _| {
            b.iter(|| split_gemm(black_box(&a), black_box(&rho), &mut out))
        });
        group.bench_with_input(BenchmarkId::new("nh", n), &n, |b, _| {
            b.iter(|| split_gemm_adjoint(black_box(&a), black_box(&rho), &mut out))
        });
    }
    group.finish();
}

fn bench_propagator(c: &mut Criterion) {
    let mut group = c.benchmark_group("rouchon_step");
    group.sample_size(50);
    for &n in &[60usize, 80] {
        let dim = FockDim::new(n).unwrap();
        let params = DuffingParams::reference();
        let dt = 2.0 * std::f64::consts::PI / 1000.0;
        let h = build_static_hamiltonian_shifted(dim, &params, 0.0, 0.0);
        let (ls, etas) = build_lindblads_shifted(dim, &params, 0.0, 0.0);
        let mut prop = RouchonPropagator::new(&h, ls, etas, dt).unwrap();
        let mut rho = thermal_state(dim, params.nbar()).matrix().clone();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut step = 0usize;
            b.iter(|| {
                prop.apply(&mut rho, black_box(0.01), step, None).unwrap();
                step += 1;
            })
        });
    }
    group.finish();
}

fn bench_recenter(c: &mut Criterion) {
    let mut group = c.benchmark_group("recenter");
    group.sample_size(30);
    for &n in &[60usize, 80] {
        let dim = FockDim::new(n).unwrap();
        let params = DuffingParams::reference();
        let dt = 2.0 * std::f64::consts::PI / 1000.0;
        let mut filter =
            QuantumFilter::new(&params, dim, dt, QuantumFilterOptions::default()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut sign = 1.0;
            b.iter(|| {
                filter.recenter(black_box(0.3 * sign), 0.0).unwrap();
                sign = -sign;
            })
        });
    }
    group.finish();
}

fn bench_pf_step(c: &mut Criterion) {
    let params = DuffingParams::reference();
    let dt = 2.0 * std::f64::consts::PI / 1000.0;
    let mut rng = stream_rng(1, StreamRole::Candidate(1));
    let mut ens = init_ensemble(500, params.nbar(), 0.5, &mut rng).unwrap();
    let mut step = 0usize;
    c.bench_function("pf_step_500", |b| {
        b.iter(|| {
            pf_step(
                &mut ens,
                black_box(0.01),
                dt,
                step as f64 * dt,
                &params,
                &mut rng,
                step,
            )
            .unwrap();
            step += 1;
        })
    });
}

criterion_group!(benches, bench_split_gemm, bench_propagator, bench_recenter, bench_pf_step);
criterion_main!(benches);
