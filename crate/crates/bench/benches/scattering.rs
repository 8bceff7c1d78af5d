use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use emconv_core::harness::{fink2018, linspace, run_cooperativity_grid, GridSpec};
use emconv_core::scattering::{conversion_spectrum, langevin_smatrix, langevin_smatrix_dense};

fn smatrix(c: &mut Criterion) {
    let cfg = fink2018();
    let res = cfg.resonators().unwrap();
    let mech = cfg.mechanics().unwrap();
    let st = cfg.state().unwrap();
    let w = mech.omega_m + 0.3 * st.total_linewidth;
    c.bench_function("smatrix/arrowhead", |b| {
        b.iter(|| langevin_smatrix(&res, &mech, &st, black_box(w)).unwrap())
    });
    c.bench_function("smatrix/dense_lu", |b| {
        b.iter(|| langevin_smatrix_dense(&res, &mech, &st, black_box(w)).unwrap())
    });
}

fn spectrum(c: &mut Criterion) {
    let cfg = fink2018();
    let res = cfg.resonators().unwrap();
    let mech = cfg.mechanics().unwrap();
    let st = cfg.state().unwrap();
    let mut group = c.benchmark_group("conversion_spectrum");
    for n in [201usize, 2001, 20001] {
        let d = linspace(-5.0 * st.total_linewidth, 5.0 * st.total_linewidth, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &d, |b, d| {
            b.iter(|| conversion_spectrum(&res, &mech, &st, d).unwrap())
        });
    }
    group.finish();
}

fn grid(c: &mut Criterion) {
    let cfg = fink2018();
    let axis: Vec<f64> = (0..40).map(|k| 10f64.powf(-2.0 + 5.0 * k as f64 / 39.0)).collect();
    let spec = GridSpec::Cooperativity { c1: axis.clone(), c2: axis };
    c.bench_function("cooperativity_grid/40x40", |b| {
        b.iter(|| run_cooperativity_grid(&cfg, &spec).unwrap())
    });
}

criterion_group!(benches, smatrix, spectrum, grid);
criterion_main!(benches);
