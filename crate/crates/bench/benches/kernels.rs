use constructa::eigen::approx_eigenpairs;
use constructa::evt::epsilon_minimize;
use constructa::selector::extract_selector;
use constructa::stability::{certify, CheckConfig};
use constructa::trajectories::picard_solve;
use constructa::{build_mesh, Hypercube};
use constructa_bench::{crossing_svf, decay, evt_problem, lyapunov_decay, matrix};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("approx_eigenpairs");
    for n in [2, 4, 8] {
        let a = matrix(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| b.iter(|| approx_eigenpairs(a, 1e-8).unwrap()));
    }
    g.finish();
}

fn picard(c: &mut Criterion) {
    let rhs = decay();
    let mut g = c.benchmark_group("picard_solve");
    g.sample_size(10);
    for eps in [1e-3, 1e-6] {
        g.bench_with_input(BenchmarkId::from_parameter(eps), &eps, |b, &eps| {
            b.iter(|| picard_solve(&rhs, black_box(&[1.0]), 1.0, eps).unwrap())
        });
    }
    g.finish();
}

fn mesh(c: &mut Criterion) {
    let cube = Hypercube::new(vec![0.0; 2], 2.0).unwrap();
    c.bench_function("build_mesh 2d 1e-2", |b| b.iter(|| build_mesh(&cube, black_box(1e-2), 1 << 24).unwrap().len()));
}

fn evt(c: &mut Criterion) {
    let (class, j) = evt_problem();
    c.bench_function("epsilon_minimize 3013", |b| b.iter(|| epsilon_minimize(&j, &class, 0.05).unwrap().index));
}

fn selector(c: &mut Criterion) {
    let f = crossing_svf();
    c.bench_function("extract_selector crossing", |b| b.iter(|| extract_selector(&f, black_box(0.02)).unwrap()));
}

fn lyapunov(c: &mut Criterion) {
    let data = lyapunov_decay();
    let cfg = CheckConfig::autonomous(1e-2);
    let mut g = c.benchmark_group("certify");
    g.sample_size(10);
    g.bench_function("decay 1e-2", |b| b.iter(|| certify(&data, &cfg).unwrap().verdict));
    g.finish();
}

criterion_group!(benches, eigen, picard, mesh, evt, selector, lyapunov);
criterion_main!(benches);
