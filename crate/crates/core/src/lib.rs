//! Long-distance-dependency (LDD) challenge sets for machine translation.
//!
//! The crate ingests dependency parses (CoNLL-U) and word alignments (Pharaoh
//! format) for a tokenized bitext, extracts sentences exhibiting reordering or
//! lexical long-distance dependencies, and evaluates system output on the
//! resulting slices with corpus BLEU, RIBES and rank correlation. It also
//! ships the seeded control-corpus samplers and the fixed-permutation corpus
//! transforms used to probe locality bias.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default). Every such loop takes an [`Exec`] so that callers and
//! benchmarks can pick the sequential path explicitly; results never depend
//! on the choice.

pub mod alignment;
pub mod conllu;
pub mod corpus;
pub mod detectors;
mod exec;
pub mod metrics;
pub mod permutation;
pub mod report;
pub mod runner;
pub mod sampling;

pub use alignment::{max_displacement, parse_pharaoh_line, AlignmentError, AlignmentSet};
pub use conllu::{parse_conllu, ConlluError, ConlluReader, ParseMode, ParsedSentence, Token};
pub use corpus::{
    load_bitext, read_challenge_set, write_challenge_set, BitextRecord, ChallengeInstance,
    ChallengeSet, CorpusError, DepIndex,
};
pub use detectors::{
    dependency_distance, detect_particle, detect_prep_stranding, detect_reflexive,
    detect_reordering, extract_challenge_sets, slice_by_distance, DetectorConfig, DetectorError,
    Phenomenon,
};
pub use exec::Exec;
pub use metrics::{
    bleu_corpus, pearson, ribes_align, ribes_corpus, ribes_sentence, spearman, BleuReport,
    MetricsError, RibesParams, RibesReport,
};
pub use permutation::{Permutation, PermutationError};
pub use sampling::{
    challenge_rank, length_matched_corpora, length_score_correlation, random_corpora,
    SampleReport, SamplingError,
};

/// Name of the tool as written into run manifests.
pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
/// Version of the tool as written into run manifests.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
