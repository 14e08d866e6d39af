use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skf_core::eval::read_gold;
use skf_core::kmeans::kmeans;
use skf_core::sql::{canonicalize, parse_sql};
use skf_core::tasks::{generate_corpus, GenerationConfig, TemplatePack};
use skf_core::testkit::{build_spider_mini, dev_json_path};
use skf_core::SamplerConfig;

fn gold_queries() -> Vec<String> {
    read_gold(&dev_json_path()).unwrap().into_iter().map(|g| g.query).collect()
}

fn sql(c: &mut Criterion) {
    let queries = gold_queries();
    c.bench_function("parse dev gold", |b| {
        b.iter(|| {
            for q in &queries {
                black_box(parse_sql(q).unwrap());
            }
        })
    });
    let parsed: Vec<_> = queries.iter().map(|q| parse_sql(q).unwrap()).collect();
    c.bench_function("canonicalize dev gold", |b| {
        b.iter(|| {
            for q in &parsed {
                black_box(canonicalize(q));
            }
        })
    });
}

fn clustering(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("kmeans k=5");
    for n in [100, 1_000, 10_000] {
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..8).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &points, |b, p| b.iter(|| kmeans(p, 5, 7)));
    }
    group.finish();
}

fn generation(c: &mut Criterion) {
    let root = build_spider_mini();
    let schemas = root.schemas();
    let pack = TemplatePack::builtin();
    let sampler = SamplerConfig::default();
    let cfg = GenerationConfig::default();
    let mut group = c.benchmark_group("generate");
    group.sample_size(10);
    group.bench_function("spider_mini defaults", |b| {
        b.iter(|| generate_corpus(&schemas, &sampler, &cfg, &pack).unwrap())
    });
    group.finish();
}

criterion_group!(benches, sql, clustering, generation);
criterion_main!(benches);
