use criterion::{criterion_group, criterion_main, Criterion};
use spdelab_bench::{kernel_table, nonlinear_model};
use spdelab_core::martingale::{project_martingale, Features, MartingaleCase, MartingaleSample};
use spdelab_core::{Boundary, CounterNoise, DriftSpec, Grid, NoiseSheet, SeedSpec, Solver};

fn noise(c: &mut Criterion) {
    let grid = Grid::new(1.0, 1.0, 64, 64).unwrap();
    c.bench_function("noise_sheet/64x64", |b| b.iter(|| NoiseSheet::sample(&grid, SeedSpec::new(1, 0))));
}

fn solve(c: &mut Criterion) {
    let model = nonlinear_model(Boundary::Neumann);
    let table = kernel_table(&model, 64);
    let solver = Solver::new(&model, &table).unwrap();
    let grid = *solver.grid();
    let noise = CounterNoise::new(grid, SeedSpec::new(2, 0));
    c.bench_function("solve/64x64", |b| b.iter(|| solver.solve(&noise).unwrap()));
    let drift = DriftSpec::Feedback { gain: 1.0, cap: 1.0 };
    c.bench_function("solve_pair/64x64", |b| b.iter(|| solver.solve_pair(&noise, &drift).unwrap()));
}

fn projection(c: &mut Criterion) {
    let grid = Grid::new(1.0, 1.0, 16, 4).unwrap();
    let sample = MartingaleSample::simulate(&MartingaleCase::Mixed, &grid, 3, 5000, None).unwrap();
    let features = Features::new(2, 2);
    let mut group = c.benchmark_group("martingale");
    group.sample_size(10);
    group.bench_function("project/5000", |b| b.iter(|| project_martingale(&sample, 2, &features).unwrap()));
    group.finish();
}

criterion_group!(benches, noise, solve, projection);
criterion_main!(benches);
