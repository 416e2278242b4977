//! Compares the data-parallel top-k scan against the sequential fallback on
//! a corpus-sized index, across several k values and a date cutoff that
//! filters roughly half the entries.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use novbench_core::corpus::Field;
use novbench_core::index::{
    date_from_days, retrieve_topk, retrieve_topk_sequential, EmbeddingVector, Index, IndexEntry,
};

const ENTRIES: usize = 12_000;
const DIMENSION: usize = 256;

fn random_unit_vector(rng: &mut ChaCha8Rng) -> EmbeddingVector {
    loop {
        let values: Vec<f32> = (0..DIMENSION).map(|_| rng.gen::<f32>() * 2.0 - 1.0).collect();
        if let Ok(vector) = EmbeddingVector::normalized(values) {
            return vector;
        }
    }
}

fn synthetic_index(rng: &mut ChaCha8Rng) -> Index {
    let entries: Vec<IndexEntry> = (0..ENTRIES)
        .map(|i| IndexEntry {
            paper_id: format!("cs/bench.{i:05}"),
            vector: random_unit_vector(rng),
            published_date: date_from_days(rng.gen_range(14000..20000)),
            field: Field::Cs,
        })
        .collect();
    Index::from_entries("bench-embedder", Field::Cs, entries).expect("index builds")
}

fn bench_retrieval(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let index = synthetic_index(&mut rng);
    let queries: Vec<EmbeddingVector> = (0..16).map(|_| random_unit_vector(&mut rng)).collect();
    let cutoff = date_from_days(17000);

    let mut group = c.benchmark_group("retrieve_topk");
    group.throughput(Throughput::Elements(ENTRIES as u64));
    for k in [10usize, 100] {
        group.bench_with_input(BenchmarkId::new("parallel", k), &k, |b, &k| {
            let mut next = 0usize;
            b.iter(|| {
                let query = &queries[next % queries.len()];
                next += 1;
                retrieve_topk(&index, query, k, cutoff).expect("retrieval succeeds")
            });
        });
        group.bench_with_input(BenchmarkId::new("sequential", k), &k, |b, &k| {
            let mut next = 0usize;
            b.iter(|| {
                let query = &queries[next % queries.len()];
                next += 1;
                retrieve_topk_sequential(&index, query, k, cutoff).expect("retrieval succeeds")
            });
        });
    }
    group.finish();
}

criterion_group!(benches, bench_retrieval);
criterion_main!(benches);
