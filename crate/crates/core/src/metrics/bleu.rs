use std::collections::HashMap;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::Serialize;

use super::{check_parallel, MetricsError};
use crate::exec::Exec;

pub const MAX_ORDER: usize = 4;

/// Sufficient statistics for corpus BLEU. Corpus statistics are the sum of
/// sentence statistics, so any subset of sentences can be scored without
/// recounting n-grams.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: Self) {
        for n in 0..MAX_ORDER {
            self.matches[n] += rhs.matches[n];
            self.totals[n] += rhs.totals[n];
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

impl Add for BleuStats {
    type Output = BleuStats;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl Sum for BleuStats {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(BleuStats::default(), Add::add)
    }
}

impl<'a> Sum<&'a BleuStats> for BleuStats {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], u64> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches and totals for one hypothesis/reference pair.
pub fn sentence_stats<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> BleuStats {
    let hyp: Vec<&str> = hyp.iter().map(AsRef::as_ref).collect();
    let reference: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let mut stats = BleuStats {
        hyp_len: hyp.len() as u64,
        ref_len: reference.len() as u64,
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        if hyp.len() < n {
            break;
        }
        let ref_counts = ngram_counts(&reference, n);
        let hyp_counts = ngram_counts(&hyp, n);
        stats.totals[n - 1] = (hyp.len() + 1 - n) as u64;
        stats.matches[n - 1] = hyp_counts
            .iter()
            .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

/// Decomposed corpus BLEU on the 0-100 scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    pub precisions: [f64; MAX_ORDER],
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub bp: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
    pub score: f64,
    /// Every hypothesis was empty; `bp` is reported as 0 by convention.
    pub empty_hypothesis: bool,
}

impl BleuStats {
    pub fn report(&self) -> BleuReport {
        let precisions = std::array::from_fn(|n| {
            if self.totals[n] == 0 {
                0.0
            } else {
                self.matches[n] as f64 / self.totals[n] as f64
            }
        });
        let empty_hypothesis = self.hyp_len == 0;
        let bp = if empty_hypothesis {
            0.0
        } else if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        let degenerate = (0..MAX_ORDER).any(|n| self.matches[n] == 0 || self.totals[n] == 0);
        let score = if empty_hypothesis || degenerate {
            0.0
        } else {
            let log_mean = precisions.iter().map(|p: &f64| p.ln()).sum::<f64>() / MAX_ORDER as f64;
            bp * log_mean.exp() * 100.0
        };
        BleuReport {
            precisions,
            matches: self.matches,
            totals: self.totals,
            bp,
            hyp_len: self.hyp_len,
            ref_len: self.ref_len,
            score,
            empty_hypothesis,
        }
    }
}

/// Corpus BLEU with multi-bleu semantics: counts summed over the corpus,
/// brevity penalty `min(1, e^(1 - r/c))`, and a zero score whenever some
/// order has no matches.
pub fn bleu_corpus<S: AsRef<str> + Sync>(hyps: &[Vec<S>], refs: &[Vec<S>]) -> Result<BleuReport, MetricsError> {
    bleu_corpus_with(hyps, refs, Exec::default())
}

pub fn bleu_corpus_with<S: AsRef<str> + Sync>(
    hyps: &[Vec<S>],
    refs: &[Vec<S>],
    exec: Exec,
) -> Result<BleuReport, MetricsError> {
    check_parallel(hyps.len(), refs.len())?;
    let stats: BleuStats = exec
        .map_range(hyps.len(), |i| sentence_stats(&hyps[i], &refs[i]))
        .iter()
        .sum();
    Ok(stats.report())
}
