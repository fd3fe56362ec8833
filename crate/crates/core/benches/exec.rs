//! Sequential vs parallel execution of the hot loops.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lddkit::corpus::{ChallengeInstance, DepIndex};
use lddkit::detectors::DetectorConfig;
use lddkit::metrics::{bleu_corpus_with, ribes_corpus_with, RibesParams};
use lddkit::{extract_challenge_sets, length_matched_corpora, AlignmentSet, BitextRecord, ChallengeSet, Exec, Phenomenon};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: usize = 400;

fn sentence(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    (0..len).map(|_| format!("w{}", rng.gen_range(0..VOCAB))).collect()
}

fn corpus(n: usize) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut hyps = Vec::with_capacity(n);
    let mut refs = Vec::with_capacity(n);
    for _ in 0..n {
        let len = rng.gen_range(5..40);
        let r = sentence(&mut rng, len);
        let mut h = r.clone();
        for tok in h.iter_mut() {
            if rng.gen_bool(0.3) {
                *tok = format!("w{}", rng.gen_range(0..VOCAB));
            }
        }
        hyps.push(h);
        refs.push(r);
    }
    (hyps, refs)
}

fn records(n: usize) -> Vec<BitextRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(5..40);
            let src = sentence(&mut rng, len).join(" ");
            let tgt = sentence(&mut rng, len).join(" ");
            let mut a = AlignmentSet::new();
            for s in 0..len {
                let t = (s + rng.gen_range(0..8)).min(len - 1);
                a.insert(s, t);
            }
            BitextRecord::new(i, &src, &tgt).with_alignment(a)
        })
        .collect()
}

fn strategies() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn bench_metrics(c: &mut Criterion) {
    let (hyps, refs) = corpus(20_000);
    let mut group = c.benchmark_group("metrics");
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::new("bleu", name), &exec, |b, &e| {
            b.iter(|| bleu_corpus_with(black_box(&hyps), black_box(&refs), e).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ribes", name), &exec, |b, &e| {
            b.iter(|| ribes_corpus_with(black_box(&hyps), black_box(&refs), RibesParams::default(), e).unwrap())
        });
    }
    group.finish();
}

fn bench_extract(c: &mut Criterion) {
    let recs = records(20_000);
    let configs = [DetectorConfig::reorder(5), DetectorConfig::reorder(7)];
    let mut group = c.benchmark_group("extract");
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::new("reorder", name), &exec, |b, &e| {
            b.iter(|| extract_challenge_sets(black_box(&recs), &configs, e).unwrap())
        });
    }
    group.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let pool = records(20_000);
    let instances = (0..500)
        .map(|i| ChallengeInstance {
            record_id: i * 37,
            phenomenon: Phenomenon::Reorder,
            head_index: None,
            dep_index: DepIndex::Pair(0, 0),
            distance: 5,
        })
        .collect();
    let set = ChallengeSet::new("bench", Phenomenon::Reorder, 5, instances);
    let mut group = c.benchmark_group("sampling");
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::new("length_matched", name), &exec, |b, &e| {
            b.iter(|| length_matched_corpora(black_box(&set), &pool, 200, 1, 3, e).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_metrics, bench_extract, bench_sampling);
criterion_main!(benches);
