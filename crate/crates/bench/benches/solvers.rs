use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sca_kit::ee::{ee_best_response, ee_solve, EeOptions};
use sca_kit::lasso::{stela_solve, StelaOptions};
use sca_kit::mimo::{bc_best_response, bc_solve};
use sca_kit::{StepsizeRule, StopCriteria};
use sca_kit_bench::{ee, lasso, mimo_bc};

fn stela(c: &mut Criterion) {
    let mut group = c.benchmark_group("stela");
    group.sample_size(20);
    for (n, k) in [(100, 200), (200, 400), (500, 1000)] {
        let inst = lasso(n, k);
        for workers in [1, 4] {
            let opts = StelaOptions { workers, ..StelaOptions::default() };
            group.bench_with_input(BenchmarkId::new(format!("{n}x{k}"), workers), &opts, |b, opts| {
                b.iter(|| stela_solve(black_box(&inst), opts).unwrap())
            });
        }
    }
    group.finish();
}

fn waterfilling(c: &mut Criterion) {
    let mut group = c.benchmark_group("mimo_bc");
    for users in [5, 20] {
        let inst = mimo_bc(users, 4);
        let q = inst.zero_point();
        group.bench_function(BenchmarkId::new("best_response", users), |b| {
            b.iter(|| bc_best_response(black_box(&q), &inst).unwrap())
        });
        group.bench_function(BenchmarkId::new("solve_exact", users), |b| {
            b.iter(|| bc_solve(black_box(&inst), StepsizeRule::ExactBisection, StopCriteria::new(1e-6, 200)).unwrap())
        });
    }
    group.finish();
}

fn energy_efficiency(c: &mut Criterion) {
    let mut group = c.benchmark_group("ee");
    for users in [4, 16] {
        let inst = ee(users);
        let p = inst.pmin.clone();
        group.bench_function(BenchmarkId::new("best_response", users), |b| {
            b.iter(|| ee_best_response(black_box(&p), &inst, &Default::default()).unwrap())
        });
        group.bench_function(BenchmarkId::new("solve", users), |b| {
            b.iter(|| ee_solve(black_box(&inst), &EeOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, stela, waterfilling, energy_efficiency);
criterion_main!(benches);
