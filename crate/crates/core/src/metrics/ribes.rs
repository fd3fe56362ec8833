use serde::Serialize;

use super::{check_parallel, MetricsError};
use crate::exec::Exec;

/// Exponents on unigram precision (`alpha`) and brevity penalty (`beta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RibesParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RibesParams {
    fn default() -> Self {
        RibesParams { alpha: 0.25, beta: 0.10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RibesReport {
    /// Normalized Kendall's tau: ascending pairs over all pairs.
    pub nkt: f64,
    pub unigram_precision: f64,
    pub bp: f64,
    pub alpha: f64,
    pub beta: f64,
    pub score: f64,
    pub n_aligned: usize,
    /// Hypothesis or reference was empty.
    pub empty_input: bool,
}

fn count_occurrences(haystack: &[&str], needle: &[&str]) -> usize {
    haystack.windows(needle.len()).filter(|w| *w == needle).count()
}

fn find_first(haystack: &[&str], needle: &[&str]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Align hypothesis words to reference positions.
///
/// A word is aligned when some n-gram containing it occurs exactly once in
/// the hypothesis and exactly once in the reference. The search starts from
/// the unigram and then grows the context one word at a time, trying the
/// left-extended n-gram before the right-extended one at each width. Words
/// that never become unique, or whose reference position is already taken,
/// are skipped.
pub fn ribes_align<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Vec<usize> {
    let hyp: Vec<&str> = hyp.iter().map(AsRef::as_ref).collect();
    let reference: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let n = hyp.len();
    let mut used = vec![false; reference.len()];
    let mut ranks = Vec::new();

    let unique_in_both =
        |gram: &[&str]| count_occurrences(&hyp, gram) == 1 && count_occurrences(&reference, gram) == 1;

    for (i, word) in hyp.iter().enumerate() {
        if !reference.contains(word) {
            continue;
        }
        let mut pos = None;
        if unique_in_both(&hyp[i..=i]) {
            pos = find_first(&reference, &hyp[i..=i]);
        } else {
            for window in 1..=i.max(n - i - 1) {
                if window <= i {
                    let gram = &hyp[i - window..=i];
                    if unique_in_both(gram) {
                        pos = find_first(&reference, gram).map(|p| p + window);
                        break;
                    }
                }
                if i + window < n {
                    let gram = &hyp[i..=i + window];
                    if unique_in_both(gram) {
                        pos = find_first(&reference, gram);
                        break;
                    }
                }
            }
        }
        if let Some(p) = pos {
            if !used[p] {
                used[p] = true;
                ranks.push(p);
            }
        }
    }
    ranks
}

fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    (1.0 - ref_len as f64 / hyp_len as f64).exp().min(1.0)
}

pub fn ribes_sentence<S: AsRef<str>>(hyp: &[S], reference: &[S], params: RibesParams) -> RibesReport {
    let mut report = RibesReport {
        nkt: 0.0,
        unigram_precision: 0.0,
        bp: 0.0,
        alpha: params.alpha,
        beta: params.beta,
        score: 0.0,
        n_aligned: 0,
        empty_input: hyp.is_empty() || reference.is_empty(),
    };
    if report.empty_input {
        return report;
    }
    let ranks = ribes_align(hyp, reference);
    let k = ranks.len();
    report.n_aligned = k;
    report.unigram_precision = k as f64 / hyp.len() as f64;
    report.bp = brevity_penalty(hyp.len(), reference.len());
    if k < 2 {
        return report;
    }
    let mut ascending = 0u64;
    for a in 0..k {
        for b in a + 1..k {
            if ranks[a] < ranks[b] {
                ascending += 1;
            }
        }
    }
    let pairs = (k * (k - 1) / 2) as f64;
    report.nkt = ascending as f64 / pairs;
    report.score = report.nkt * report.unigram_precision.powf(params.alpha) * report.bp.powf(params.beta);
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RibesCorpusReport {
    /// Mean sentence score.
    pub score: f64,
    pub mean_nkt: f64,
    pub mean_precision: f64,
    pub mean_bp: f64,
    pub alpha: f64,
    pub beta: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
    pub n_sentences: usize,
}

pub fn ribes_corpus<S: AsRef<str> + Sync>(
    hyps: &[Vec<S>],
    refs: &[Vec<S>],
    params: RibesParams,
) -> Result<RibesCorpusReport, MetricsError> {
    ribes_corpus_with(hyps, refs, params, Exec::default())
}

pub fn ribes_corpus_with<S: AsRef<str> + Sync>(
    hyps: &[Vec<S>],
    refs: &[Vec<S>],
    params: RibesParams,
    exec: Exec,
) -> Result<RibesCorpusReport, MetricsError> {
    check_parallel(hyps.len(), refs.len())?;
    let sentences = exec.map_range(hyps.len(), |i| ribes_sentence(&hyps[i], &refs[i], params));
    let n = sentences.len() as f64;
    let mean = |f: fn(&RibesReport) -> f64| sentences.iter().map(f).sum::<f64>() / n;
    Ok(RibesCorpusReport {
        score: mean(|r| r.score),
        mean_nkt: mean(|r| r.nkt),
        mean_precision: mean(|r| r.unigram_precision),
        mean_bp: mean(|r| r.bp),
        alpha: params.alpha,
        beta: params.beta,
        hyp_len: hyps.iter().map(|h| h.len() as u64).sum(),
        ref_len: refs.iter().map(|r| r.len() as u64).sum(),
        n_sentences: sentences.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn align_unique_unigrams() {
        assert_eq!(ribes_align(&toks("a b c d"), &toks("a b c d")), vec![0, 1, 2, 3]);
        assert_eq!(ribes_align(&toks("a c b d"), &toks("a b c d")), vec![0, 2, 1, 3]);
        assert_eq!(ribes_align(&toks("a x d"), &toks("a b c d")), vec![0, 3]);
    }

    #[test]
    fn align_context_growth() {
        // i=0 "a": right bigram "a a" is unique in both, ref offset 1.
        // i=1 "a": left bigram "a a" unique, ref offset 1 + 1 = 2.
        // i=2 "b": unique unigram at ref 0.
        assert_eq!(ribes_align(&toks("a a b"), &toks("b a a")), vec![1, 2, 0]);
        // "a" repeated with no disambiguating context is skipped.
        assert_eq!(ribes_align(&toks("a a"), &toks("a a a")), Vec::<usize>::new());
    }

    #[test]
    fn align_never_reuses_reference_positions() {
        // Both "a"s find unique contexts ("x a", "a y") pointing at ref 1.
        assert_eq!(ribes_align(&toks("x a z a y"), &toks("x a y")), vec![0, 1, 2]);
    }

    #[test]
    fn sentence_scores() {
        let p = RibesParams::default();
        assert_eq!(ribes_sentence(&toks("a b c d"), &toks("a b c d"), p).score, 1.0);
        assert_eq!(ribes_sentence(&toks("d c b a"), &toks("a b c d"), p).score, 0.0);
        let r = ribes_sentence(&toks("a c b d"), &toks("a b c d"), p);
        assert!((r.nkt - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.unigram_precision, 1.0);
        assert_eq!(r.bp, 1.0);
        assert!((r.score - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn fewer_than_two_aligned() {
        let r = ribes_sentence(&toks("a x"), &toks("a b"), RibesParams::default());
        assert_eq!(r.n_aligned, 1);
        assert_eq!(r.score, 0.0);
        let r = ribes_sentence(&[] as &[&str], &toks("a b"), RibesParams::default());
        assert!(r.empty_input);
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn corpus_mean() {
        let p = RibesParams::default();
        let hyps = vec![toks("a b c"), toks("c b a")];
        let refs = vec![toks("a b c"), toks("a b c")];
        assert_eq!(ribes_corpus(&hyps, &refs, p).unwrap().score, 0.5);
        let single = ribes_corpus(&hyps[..1], &refs[..1], p).unwrap();
        assert_eq!(single.score, ribes_sentence(&hyps[0], &refs[0], p).score);
        assert!(ribes_corpus(&hyps, &refs[..1], p).is_err());
    }
}
