use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use posmdp::model::{build_bus_problem, build_maintenance_problem};
use posmdp::solver::{solve, starting_value_function, BackupKernel, SolverConfig};
use posmdp::{collect, Execution, PosmdpModel, SampleBank, ValueFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn solved(model: &PosmdpModel, bank: &SampleBank, iters: usize) -> ValueFunction {
    let config = SolverConfig {
        max_iters: iters,
        epsilon: 1e-12,
        execution: Execution::Parallel,
    };
    let v0 = starting_value_function(model, bank).unwrap();
    solve(model, bank, v0, &config, &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap()
        .value_function
}

fn backup_modes(c: &mut Criterion) {
    let mut group = c.benchmark_group("backup");
    for (name, model) in [
        ("bus", build_bus_problem()),
        ("maintenance", build_maintenance_problem(100).unwrap()),
    ] {
        let bank = collect(&model, 2000, 1);
        let v = solved(&model, &bank, 10);
        let kernel = BackupKernel::new(&model, &bank);
        let xi = &bank.beliefs()[bank.beliefs().len() / 2];
        for (mode, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, mode), &exec, |b, &exec| {
                b.iter(|| kernel.backup(black_box(&v), black_box(xi), exec))
            });
        }
    }
    group.finish();
}

fn backup_scaling(c: &mut Criterion) {
    let mut group = c.benchmark_group("backup_vs_samples");
    let model = build_maintenance_problem(100).unwrap();
    let reference = collect(&model, 1000, 2);
    let v = solved(&model, &reference, 10);
    for n in [500, 1000, 2000, 4000, 8000] {
        let bank = collect(&model, n + 1, 3);
        let kernel = BackupKernel::new(&model, &bank);
        let xi = &reference.beliefs()[reference.beliefs().len() / 2];
        for (mode, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(mode, n), &exec, |b, &exec| {
                b.iter(|| kernel.backup(black_box(&v), black_box(xi), exec))
            });
        }
    }
    group.finish();
}

fn solve_modes(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_bus");
    group.sample_size(10);
    let model = build_bus_problem();
    let bank = collect(&model, 2000, 4);
    for (mode, exec) in MODES {
        group.bench_function(mode, |b| {
            b.iter(|| {
                let config = SolverConfig {
                    execution: exec,
                    ..SolverConfig::for_model(&model)
                };
                let v0 = starting_value_function(&model, &bank).unwrap();
                solve(&model, &bank, v0, &config, &mut ChaCha8Rng::seed_from_u64(4)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, backup_modes, backup_scaling, solve_modes);
criterion_main!(benches);
