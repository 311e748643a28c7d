use std::hint::black_box;

use convspec::exact::{qn_law, spectrum_law_bruteforce, ExactEngine, QnOptions};
use convspec::samplers::sample_many_exact;
use convspec::{suffix_table, t_distribution, Family, Model, ModelSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn poisson() -> Model {
    Model::new(ModelSpec::poisson_power(1.5, 1.0)).unwrap()
}

fn tables(c: &mut Criterion) {
    let m = poisson();
    let mut g = c.benchmark_group("tables");
    for n in [100usize, 400] {
        g.bench_with_input(BenchmarkId::new("t_distribution", n), &n, |b, &n| {
            b.iter(|| t_distribution(&m, 0, black_box(n)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("suffix_table", n), &n, |b, &n| {
            b.iter(|| suffix_table(&m, black_box(n)).unwrap())
        });
    }
    g.finish();
}

fn conditional_laws(c: &mut Criterion) {
    let m = Model::new(ModelSpec::forest(Family::ForestUnlabelledUnrooted)).unwrap();
    let e = ExactEngine::new(&m, 200).unwrap();
    let mut g = c.benchmark_group("conditional");
    g.bench_function("marginal_j1_n200", |b| b.iter(|| e.conditional_marginal(black_box(1)).unwrap()));
    g.bench_function("largest_n200", |b| b.iter(|| e.largest_component_law().unwrap()));
    g.bench_function("count_law_n200", |b| b.iter(|| e.component_count_law(black_box(200)).unwrap()));
    g.finish();
}

fn enumeration(c: &mut Criterion) {
    let m = poisson();
    let mut g = c.benchmark_group("enumeration");
    g.sample_size(10);
    g.bench_function("bruteforce_n25", |b| b.iter(|| spectrum_law_bruteforce(&m, black_box(25)).unwrap()));
    g.bench_function("qn_n20", |b| b.iter(|| qn_law(&m, black_box(20), QnOptions::new(1e-6)).unwrap()));
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let m = poisson();
    let e = ExactEngine::new(&m, 100).unwrap();
    c.bench_function("sample_exact_n100_x10000", |b| {
        b.iter(|| sample_many_exact(&e, black_box(1), 10_000).unwrap())
    });
}

criterion_group!(benches, tables, conditional_laws, enumeration, sampling);
criterion_main!(benches);
