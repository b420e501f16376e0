use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rankopt::experiment::{gen_problem, initial_guess, preset, CompletionSpec};
use rankopt::solvers::{rf_step, sd_step, solve, SolverConfig, Variant};
use rankopt::variety::{project_cone, retract};
use rankopt::Objective;

fn specs() -> Vec<(String, CompletionSpec)> {
    let small = preset("fig1-small").unwrap();
    let deficient = preset("fig2-small").unwrap();
    vec![("n300-k8".into(), small), ("n300-r4-k8".into(), deficient)]
}

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("geometry");
    for (name, spec) in specs() {
        let p = gen_problem(&spec).unwrap();
        let x = initial_guess(&p.objective, spec.k).unwrap();
        let grad = p.objective.gradient(x.matrix()).unwrap();
        let neg = grad.scaled(-1.0);
        let (xi, _) = project_cone(&x, &neg).unwrap();

        g.bench_with_input(BenchmarkId::new("gradient", &name), &x, |b, x| {
            b.iter(|| p.objective.gradient(black_box(x.matrix())).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("project_cone", &name), &x, |b, x| {
            b.iter(|| project_cone(black_box(x), black_box(&neg)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("retract", &name), &x, |b, x| {
            b.iter(|| retract(black_box(x), black_box(&xi), 1.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("sd_step", &name), &x, |b, x| b.iter(|| sd_step(black_box(x), &grad).unwrap()));
        g.bench_with_input(BenchmarkId::new("rf_step", &name), &x, |b, x| b.iter(|| rf_step(black_box(x), &grad).unwrap()));
    }
    g.finish();
}

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solver_10_iters");
    g.sample_size(10);
    let spec = preset("fig1-small").unwrap();
    let p = gen_problem(&spec).unwrap();
    let x0 = initial_guess(&p.objective, spec.k).unwrap();
    for variant in [Variant::SteepestDescent, Variant::RetractionFree] {
        let mut cfg = SolverConfig::new(spec.k, variant);
        cfg.max_iters = 10;
        cfg.record_time = false;
        g.bench_function(variant.short_name(), |b| b.iter(|| solve(&p.objective, x0.clone(), &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, geometry, solver);
criterion_main!(benches);
