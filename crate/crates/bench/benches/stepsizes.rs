use criterion::{criterion_group, criterion_main, Criterion};
use ngn_core::stepsizes::{ggn_stepsize, ngn_stepsize, Curvature, Policy, StepObservation};
use std::hint::black_box;

fn formulas(c: &mut Criterion) {
    c.bench_function("ngn_stepsize", |b| b.iter(|| ngn_stepsize(black_box(1.0), black_box(2.5), black_box(4.0))));
    c.bench_function("ggn_neg_log", |b| {
        b.iter(|| ggn_stepsize(black_box(1.0), Curvature::NegLog, black_box(2.5), black_box(4.0)))
    });
}

fn policies(c: &mut Criterion) {
    let mut group = c.benchmark_group("policy_observe");
    for spec in ["ngn(sigma=1)", "ngn_annealed(sigma0=1)", "adagrad_norm(eta=1, delta0=0.01)", "aps"] {
        let mut policy = Policy::new(spec.parse().unwrap()).unwrap();
        let mut k = 0u64;
        group.bench_function(spec, |b| {
            b.iter(|| {
                k += 1;
                policy.observe(black_box(&StepObservation::new(k, 2.5, 4.0))).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, formulas, policies);
criterion_main!(benches);
