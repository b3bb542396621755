use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mcstab::embedded::reconstruct_from_kernel;
use mcstab::ergodicity::{dobrushin_coefficient, invariant_distribution};
use mcstab::experiments::{canonical_balls, canonical_family, canonical_target, run_suite_with_model, ExperimentConfig};
use mcstab::risk::{perron_lambda_oracle, solve_risk_poisson};
use mcstab::{closed_loop, Model, RiskFactor, SearchBudget, SolverOptions};

fn kernels(c: &mut Criterion) {
    let family = canonical_family();
    let p = closed_loop(&family, &canonical_target()).unwrap();
    let f = [0.0, 0.25, 0.5, 0.75, 1.0];
    let alpha = RiskFactor::new(0.5).unwrap();
    let budget = SearchBudget::default();
    let balls = canonical_balls();

    c.bench_function("invariant_distribution", |b| b.iter(|| invariant_distribution(black_box(&p)).unwrap()));
    c.bench_function("solve_risk_poisson", |b| {
        b.iter(|| solve_risk_poisson(black_box(&p), &f, alpha, &SolverOptions::default()).unwrap())
    });
    c.bench_function("perron_lambda_oracle", |b| b.iter(|| perron_lambda_oracle(black_box(&p), &f, alpha).unwrap()));
    c.bench_function("dobrushin_m2", |b| b.iter(|| dobrushin_coefficient(black_box(&family), 2, &budget).unwrap()));
    c.bench_function("reconstruct_invariant", |b| b.iter(|| reconstruct_from_kernel(black_box(&p), &balls).unwrap()));
}

fn suite(c: &mut Criterion) {
    let model = Model::canonical();
    let config = ExperimentConfig::default();
    let mut group = c.benchmark_group("suite");
    group.sample_size(10);
    group.bench_function("canonical_1_to_6", |b| b.iter(|| run_suite_with_model(black_box(&model), &config).unwrap()));
    group.finish();
}

criterion_group!(benches, kernels, suite);
criterion_main!(benches);
