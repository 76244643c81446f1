use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use funnelgate::lmi::search;
use funnelgate::scenario::preset;
use funnelgate::sim::SimConfig;

fn seed_batches(c: &mut Criterion) {
    let mut group = c.benchmark_group("seed_batch");
    group.sample_size(10);
    for name in ["example2", "example3-cos"] {
        let mut config = preset(name).unwrap();
        config.sim = SimConfig { horizon: 20.0, ..config.sim };
        let scenario = config.build().unwrap();
        let seeds: Vec<u64> = (0..8).collect();
        group.bench_with_input(BenchmarkId::new("sequential", name), &seeds, |b, seeds| {
            b.iter(|| black_box(scenario.run_seeds_sequential(seeds)))
        });
        group.bench_with_input(BenchmarkId::new("parallel", name), &seeds, |b, seeds| {
            b.iter(|| black_box(scenario.run_seeds(seeds)))
        });
    }
    group.finish();
}

fn certificate_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("certificate_search");
    group.sample_size(10);
    for name in ["example2", "example3-exp"] {
        let scenario = preset(name).unwrap().build().unwrap();
        let problem = scenario.problem().unwrap();
        let opts = scenario.search_options(0);
        group.bench_function(name, |b| b.iter(|| black_box(search(&problem, &opts).is_ok())));
    }
    group.finish();
}

criterion_group!(benches, seed_batches, certificate_search);
criterion_main!(benches);
