use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use ptwell_core::{
    action_set, assemble, classify_wells, eigs_near, eval_f, poly_roots, winding_in,
    ComplexPolynomial, Grid, PerturbedPotential, Rectangle, SpectralParams,
};

fn quartic() -> PerturbedPotential {
    PerturbedPotential::new(vec![0.0, 0.0, -0.5, 0.0, 0.05], vec![0.0, 1.0], true).unwrap()
}

fn bench_poly_roots(c: &mut Criterion) {
    let p = ComplexPolynomial::from_real(&[1.0, 0.0, -0.5, 0.0, 0.05]);
    c.bench_function("poly_roots quartic", |b| {
        b.iter(|| poly_roots(black_box(&p), 1e-13).unwrap())
    });
}

fn bench_actions(c: &mut Criterion) {
    let pot = quartic();
    let wells = classify_wells(&pot, -1.0).unwrap();
    let e = Complex64::new(-1.0, 1e-5);
    c.bench_function("action_set 96 nodes", |b| {
        b.iter(|| action_set(&pot, black_box(e), 1e-4, &wells, 96).unwrap())
    });
}

fn bench_eval_f(c: &mut Criterion) {
    let pot = quartic();
    let wells = classify_wells(&pot, -1.0).unwrap();
    let params = SpectralParams::new(0.2, 1e-4).unwrap();
    let e = Complex64::new(-1.05, 2e-4);
    c.bench_function("eval_f", |b| {
        b.iter(|| eval_f(&pot, black_box(e), &params, &wells).unwrap())
    });
}

fn bench_winding(c: &mut Criterion) {
    let pot = quartic();
    let wells = classify_wells(&pot, -1.0).unwrap();
    let params = SpectralParams::new(0.2, 1e-4).unwrap();
    let rect = Rectangle::new(Complex64::new(-1.05, 0.0), 0.08, 0.01).unwrap();
    c.bench_function("winding_in window", |b| {
        b.iter(|| winding_in(&pot, &params, &wells, black_box(&rect)).unwrap())
    });
}

fn bench_eigensolver(c: &mut Criterion) {
    let pot = quartic();
    let opr = assemble(&pot, Grid::new(4.0, 2000).unwrap(), 0.2, 1e-4);
    let sigma = Complex64::new(-1.05, 0.0);
    c.bench_function("eigs_near 4 pairs n=2000", |b| {
        b.iter(|| eigs_near(black_box(&opr), sigma, 4, 1e-10, 4).unwrap())
    });
}

criterion_group!(
    benches,
    bench_poly_roots,
    bench_actions,
    bench_eval_f,
    bench_winding,
    bench_eigensolver
);
criterion_main!(benches);
