use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spdelab_bench::kernel_table;
use spdelab_core::heat_kernel::Semigroup;
use spdelab_core::{Boundary, ModelSpec};

fn table_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_table");
    group.sample_size(10);
    for boundary in [Boundary::Dirichlet, Boundary::Neumann, Boundary::Periodic] {
        let model = ModelSpec::additive(boundary, 1.0);
        for n in [32, 64] {
            group.bench_with_input(BenchmarkId::new(format!("{boundary:?}"), n), &n, |b, &n| {
                b.iter(|| kernel_table(&model, n))
            });
        }
    }
    group.finish();
}

fn functionals(c: &mut Criterion) {
    let table = kernel_table(&ModelSpec::additive(Boundary::Dirichlet, 1.0), 64);
    c.bench_function("g_total/64", |b| b.iter(|| table.g_total()));
    c.bench_function("g_alpha/64", |b| b.iter(|| table.g_const_alpha(1.5).unwrap()));
    let generator = table.semigroup().generator().clone();
    c.bench_function("semigroup_new/64", |b| b.iter(|| Semigroup::new(generator.clone()).unwrap()));
}

criterion_group!(benches, table_build, functionals);
criterion_main!(benches);
