//! Corpus BLEU, RIBES and rank/linear correlation.

mod bleu;
mod correlation;
mod ribes;

use thiserror::Error;

pub use bleu::{bleu_corpus, bleu_corpus_with, sentence_stats, BleuReport, BleuStats, MAX_ORDER};
pub use correlation::{average_ranks, pearson, spearman};
pub use ribes::{
    ribes_align, ribes_corpus, ribes_corpus_with, ribes_sentence, RibesCorpusReport, RibesParams,
    RibesReport,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{hyps} hypotheses vs {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub(crate) fn check_parallel(hyps: usize, refs: usize) -> Result<(), MetricsError> {
    if hyps != refs {
        return Err(MetricsError::LengthMismatch { hyps, refs });
    }
    if hyps == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(())
}
