// Sequential (one worker) versus the global pool for the data-parallel
// kernels. Build with `--no-default-features` for the rayon-free fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rotstar::eos::{EosParams, EntropyRule, Omega2Rule};
use rotstar::field::{gradient_rz, GridSpec};
use rotstar::gravity::{potential_axisym, uniform_ball};
use rotstar::monotone::{solve_fitted, MonotoneConfig};
use rotstar::par;
use std::hint::black_box;

fn modes() -> Vec<(&'static str, usize)> {
    let mut m = vec![("sequential", 1)];
    if par::current_threads() > 1 {
        m.push(("pool", par::current_threads()));
    }
    m
}

fn potential(c: &mut Criterion) {
    let mut group = c.benchmark_group("potential_axisym");
    group.sample_size(10);
    for nr in [33, 65] {
        let g = GridSpec::square(nr, 2.0).unwrap();
        let rho = uniform_ball(&g, 1.0).unwrap();
        for (name, threads) in modes() {
            group.bench_with_input(BenchmarkId::new(name, nr), &rho, |b, rho| {
                b.iter(|| par::with_threads(threads, || potential_axisym(black_box(rho)).unwrap()))
            });
        }
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient_rz");
    let g = GridSpec::square(257, 2.0).unwrap();
    let rho = uniform_ball(&g, 1.0).unwrap();
    for (name, threads) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| par::with_threads(threads, || gradient_rz(black_box(&rho)).unwrap()))
        });
    }
    group.finish();
}

fn monotone(c: &mut Criterion) {
    let mut group = c.benchmark_group("monotone_solve");
    group.sample_size(10);
    let eos = EosParams::new(3.0).unwrap();
    let s = EntropyRule::RadialQuadratic { a: 0.1 };
    let om = Omega2Rule::RigidSquared { value: 0.05 };
    for (name, threads) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| {
                par::with_threads(threads, || solve_fitted(&eos, &s, &om, 33, &MonotoneConfig::default()).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, potential, gradient, monotone);
criterion_main!(benches);
