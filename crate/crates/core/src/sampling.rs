//! Seeded control corpora: length-matched resamples of a challenge set,
//! uniform random corpora, and the length/score correlation check.
//!
//! Corpus `k` draws from its own generator seeded with `seed ^ k`, so the
//! output does not depend on how corpora are scheduled across threads.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{BitextRecord, ChallengeSet};
use crate::exec::Exec;
use crate::metrics::{pearson, MetricsError};

/// Name of the generator recorded in every report.
pub const GENERATOR: &str = "ChaCha8Rng";

/// Draw attempts before falling back to scanning a bucket for unused items.
const REJECTION_TRIES: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("no pool sentence with source length within {tol} of {length}")]
    EmptyBucket { length: usize, tol: usize },
    #[error("record {0} of the challenge set is not in the pool")]
    UnknownRecord(usize),
    #[error("cannot draw {size} sentences from a pool of {pool}")]
    PoolTooSmall { size: usize, pool: usize },
    #[error("{corpora} corpora vs {scores} scores")]
    LengthMismatch { corpora: usize, scores: usize },
    #[error("corpus {0} is empty")]
    EmptyCorpus(usize),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Generator for corpus `index` under `seed`.
pub fn substream(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index as u64)
}

/// Sampled corpora plus the number of draws that had to reuse a sentence
/// within one corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sampled {
    pub corpora: Vec<Vec<usize>>,
    pub with_replacement_draws: usize,
}

/// Length-matched resampling over explicit lengths. Items are indices into
/// `pool_lengths`.
pub fn length_matched_indices(
    target_lengths: &[usize],
    pool_lengths: &[usize],
    n_corpora: usize,
    tol: usize,
    seed: u64,
    exec: Exec,
) -> Result<Sampled, SamplingError> {
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &len in target_lengths {
        if buckets.contains_key(&len) {
            continue;
        }
        let members: Vec<usize> = pool_lengths
            .iter()
            .enumerate()
            .filter(|(_, &l)| l.abs_diff(len) <= tol)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            return Err(SamplingError::EmptyBucket { length: len, tol });
        }
        buckets.insert(len, members);
    }

    let draws = exec.map_range(n_corpora, |k| {
        let mut rng = substream(seed, k);
        let mut used = HashSet::with_capacity(target_lengths.len());
        let mut corpus = Vec::with_capacity(target_lengths.len());
        let mut reused = 0usize;
        for len in target_lengths {
            let bucket = &buckets[len];
            let mut pick = None;
            for _ in 0..REJECTION_TRIES {
                let c = bucket[rng.gen_range(0..bucket.len())];
                if !used.contains(&c) {
                    pick = Some(c);
                    break;
                }
            }
            if pick.is_none() {
                let free: Vec<usize> = bucket.iter().copied().filter(|c| !used.contains(c)).collect();
                if !free.is_empty() {
                    pick = Some(free[rng.gen_range(0..free.len())]);
                }
            }
            let c = pick.unwrap_or_else(|| {
                reused += 1;
                bucket[rng.gen_range(0..bucket.len())]
            });
            used.insert(c);
            corpus.push(c);
        }
        (corpus, reused)
    });

    let with_replacement_draws = draws.iter().map(|d| d.1).sum();
    if with_replacement_draws > 0 {
        log::warn!("{with_replacement_draws} draw(s) exhausted their length bucket and reused a sentence");
    }
    Ok(Sampled {
        corpora: draws.into_iter().map(|d| d.0).collect(),
        with_replacement_draws,
    })
}

/// Resample `n_corpora` corpora matching the challenge set sentence by
/// sentence on source length (within `tol`). Returns record ids.
pub fn length_matched_corpora(
    challenge: &ChallengeSet,
    pool: &[BitextRecord],
    n_corpora: usize,
    tol: usize,
    seed: u64,
    exec: Exec,
) -> Result<Sampled, SamplingError> {
    let by_id: HashMap<usize, usize> = pool.iter().map(|r| (r.record_id, r.src_len())).collect();
    let targets = challenge
        .record_ids
        .iter()
        .map(|id| by_id.get(id).copied().ok_or(SamplingError::UnknownRecord(*id)))
        .collect::<Result<Vec<_>, _>>()?;
    let pool_lengths: Vec<usize> = pool.iter().map(BitextRecord::src_len).collect();
    let mut sampled = length_matched_indices(&targets, &pool_lengths, n_corpora, tol, seed, exec)?;
    for corpus in &mut sampled.corpora {
        for item in corpus.iter_mut() {
            *item = pool[*item].record_id;
        }
    }
    Ok(sampled)
}

/// `n` uniform without-replacement samples of `size` records each.
pub fn random_corpora(
    pool: &[BitextRecord],
    size: usize,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Vec<usize>>, SamplingError> {
    if size > pool.len() {
        return Err(SamplingError::PoolTooSmall { size, pool: pool.len() });
    }
    Ok(exec.map_range(n, |k| {
        let mut rng = substream(seed, k);
        rand::seq::index::sample(&mut rng, pool.len(), size)
            .into_iter()
            .map(|i| pool[i].record_id)
            .collect()
    }))
}

/// Mean source length of each corpus.
pub fn mean_lengths(corpora: &[Vec<usize>], pool: &[BitextRecord]) -> Result<Vec<f64>, SamplingError> {
    let by_id: HashMap<usize, usize> = pool.iter().map(|r| (r.record_id, r.src_len())).collect();
    corpora
        .iter()
        .enumerate()
        .map(|(k, corpus)| {
            if corpus.is_empty() {
                return Err(SamplingError::EmptyCorpus(k));
            }
            let total = corpus
                .iter()
                .map(|id| by_id.get(id).copied().ok_or(SamplingError::UnknownRecord(*id)))
                .sum::<Result<usize, _>>()?;
            Ok(total as f64 / corpus.len() as f64)
        })
        .collect()
}

/// Pearson correlation between per-corpus mean source length and score.
pub fn length_score_correlation(
    corpora: &[Vec<usize>],
    pool: &[BitextRecord],
    scores: &[f64],
) -> Result<f64, SamplingError> {
    if corpora.len() != scores.len() {
        return Err(SamplingError::LengthMismatch {
            corpora: corpora.len(),
            scores: scores.len(),
        });
    }
    Ok(pearson(&mean_lengths(corpora, pool)?, scores)?)
}

/// Where the challenge-set score falls among the control scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub generator: String,
    pub seed: u64,
    pub n_corpora: usize,
    pub challenge_score: f64,
    pub sample_scores: Vec<f64>,
    /// Samples scoring `<=` the challenge score.
    pub rank: usize,
    pub empirical_p: f64,
    /// The challenge score is strictly below every sample.
    pub below_all: bool,
}

/// Rank the challenge score against the samples; ties count against the
/// challenge set. With no samples the rank and p are both 0.
pub fn challenge_rank(challenge_score: f64, sample_scores: &[f64], seed: u64) -> SampleReport {
    let rank = sample_scores.iter().filter(|&&s| s <= challenge_score).count();
    let n = sample_scores.len();
    SampleReport {
        generator: GENERATOR.to_string(),
        seed,
        n_corpora: n,
        challenge_score,
        sample_scores: sample_scores.to_vec(),
        rank,
        empirical_p: if n == 0 { 0.0 } else { rank as f64 / n as f64 },
        below_all: n > 0 && rank == 0,
    }
}
