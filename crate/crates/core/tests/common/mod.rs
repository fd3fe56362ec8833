//! Helpers shared by the integration tests: an independent BLEU oracle,
//! fixture paths, and random synthetic dependency trees.
#![allow(dead_code)]

use std::collections::HashMap;
use std::io::Cursor;
use std::path::PathBuf;

use lddkit::{parse_conllu, AlignmentSet, BitextRecord, ParseMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Straight transcription of the multi-bleu procedure: per-sentence clipped
/// n-gram counts summed over the corpus, geometric mean in log space.
pub fn oracle_bleu(hyps: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let mut correct = [0u64; 4];
    let mut total = [0u64; 4];
    let (mut c, mut r) = (0u64, 0u64);
    for (h, rf) in hyps.iter().zip(refs) {
        c += h.len() as u64;
        r += rf.len() as u64;
        for n in 1..=4 {
            let mut ref_counts: HashMap<&[String], u64> = HashMap::new();
            if rf.len() >= n {
                for g in rf.windows(n) {
                    *ref_counts.entry(g).or_default() += 1;
                }
            }
            let mut hyp_counts: HashMap<&[String], u64> = HashMap::new();
            if h.len() >= n {
                for g in h.windows(n) {
                    *hyp_counts.entry(g).or_default() += 1;
                }
                total[n - 1] += (h.len() - n + 1) as u64;
            }
            for (g, k) in hyp_counts {
                correct[n - 1] += k.min(ref_counts.get(g).copied().unwrap_or(0));
            }
        }
    }
    if c == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        if correct[n] == 0 || total[n] == 0 {
            return 0.0;
        }
        log_sum += (correct[n] as f64 / total[n] as f64).ln();
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    100.0 * bp * (log_sum / 4.0).exp()
}

/// Micro-corpus over a `vocab`-word vocabulary; hypotheses are noisy copies
/// of the references so that higher-order matches occur.
pub fn micro_corpus(rng: &mut ChaCha8Rng, vocab: usize) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let n = rng.gen_range(5..=50);
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..n {
        let len = rng.gen_range(5..=15);
        let r: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect();
        let mut h = r.clone();
        for t in h.iter_mut() {
            if rng.gen_bool(0.3) {
                *t = format!("w{}", rng.gen_range(0..vocab));
            }
        }
        if rng.gen_bool(0.2) {
            let keep = rng.gen_range(5..=h.len());
            h.truncate(keep);
        }
        hyps.push(h);
        refs.push(r);
    }
    (hyps, refs)
}

const DEPRELS: [&str; 8] = ["compound:prt", "prt", "compound", "obl", "obl:arg", "nmod", "obj", "case"];
const UPOS: [&str; 5] = ["ADP", "PART", "PRON", "VERB", "NOUN"];

/// A random record carrying a random (possibly cyclic) dependency tree and a
/// random alignment.
pub fn random_record(rng: &mut ChaCha8Rng, id: usize) -> BitextRecord {
    let n = rng.gen_range(2..=20);
    let root = rng.gen_range(1..=n);
    let mut block = format!("# sent_id = r{id}\n");
    let mut words = Vec::with_capacity(n);
    for i in 1..=n {
        let (head, deprel) = if i == root {
            (0, "root")
        } else {
            let mut h = rng.gen_range(1..=n);
            while h == i {
                h = rng.gen_range(1..=n);
            }
            (h, DEPRELS[rng.gen_range(0..DEPRELS.len())])
        };
        let upos = UPOS[rng.gen_range(0..UPOS.len())];
        let feats = if rng.gen_bool(0.2) { "Reflex=Yes" } else { "_" };
        let form = format!("t{i}");
        block.push_str(&format!("{i}\t{form}\t{form}\t{upos}\t_\t{feats}\t{head}\t{deprel}\t_\t_\n"));
        words.push(form);
    }
    let parse = parse_conllu(Cursor::new(block), ParseMode::Strict)
        .expect("generated block parses")
        .remove(0);
    let tgt_len = rng.gen_range(1..=20);
    let mut a = AlignmentSet::new();
    for _ in 0..rng.gen_range(0..=n) {
        a.insert(rng.gen_range(0..n), rng.gen_range(0..tgt_len));
    }
    let tgt: Vec<String> = (0..tgt_len).map(|j| format!("u{j}")).collect();
    BitextRecord::new(id, &words.join(" "), &tgt.join(" "))
        .with_parse(parse)
        .with_alignment(a)
}

pub fn random_records(n: usize, seed: u64) -> Vec<BitextRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| random_record(&mut rng, i)).collect()
}
