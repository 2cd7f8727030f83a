//! Sequential against rayon execution for the data-parallel loops.
//! Build with `--no-default-features` to see the fallback alone.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use poplotto::equilibrium::{verify_nash_with, verify_subpop_consistency_with};
use poplotto::structure::{outcome_matrix_with, sub_leagues_with, transitivity_report_with};
use poplotto::{solve, DiscreteBudgetDistribution, EquilibriumSolution, Execution};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

/// Deterministic spread of budgets over three decades with uneven masses.
fn population(n: usize) -> DiscreteBudgetDistribution {
    DiscreteBudgetDistribution::new((0..n).map(|i| {
        let t = i as f64 / n as f64;
        (0.1 * 1000f64.powf(t), 1.0 + (i % 7) as f64)
    }))
    .unwrap()
}

fn matrices(c: &mut Criterion) {
    let mut group = c.benchmark_group("outcome_matrix");
    for n in [20, 60] {
        let sol = solve(&population(n)).unwrap();
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &sol, |b, sol| {
                b.iter(|| outcome_matrix_with(black_box(sol), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn triples(c: &mut Criterion) {
    let mut group = c.benchmark_group("transitivity_report");
    for n in [30, 80] {
        let w = outcome_matrix_with(&solve(&population(n)).unwrap(), Execution::Sequential).unwrap();
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &w, |b, w| {
                b.iter(|| transitivity_report_with(black_box(w), 1e-9, exec))
            });
        }
    }
    group.finish();
}

fn prefixes(c: &mut Criterion) {
    let mut group = c.benchmark_group("prefixes");
    let dist = population(40);
    let sol = solve(&dist).unwrap();
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::new("sub_leagues", name), |b| {
            b.iter(|| sub_leagues_with(black_box(&dist), 1e-9, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("subpop_consistency", name), |b| {
            b.iter(|| verify_subpop_consistency_with(black_box(&dist), &sol, 1e-9, exec))
        });
    }
    group.finish();
}

fn batch_verify(c: &mut Criterion) {
    let batch: Vec<EquilibriumSolution> = (5..45).map(|n| solve(&population(n)).unwrap()).collect();
    let mut group = c.benchmark_group("batch_verify");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| {
                exec.map_slice(black_box(&batch), |s| {
                    verify_nash_with(s, 1e-9, Execution::Sequential).pass
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, matrices, triples, prefixes, batch_verify);
criterion_main!(benches);
