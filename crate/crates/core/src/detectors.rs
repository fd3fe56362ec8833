//! Extraction rules for reordering and lexical long-distance dependencies.
//!
//! Lexical distances count intervening syntactic words (`|head - dep| - 1`),
//! so `d >= 1` means at least one word separates the pair and `d = 0` admits
//! adjacent pairs. Reordering distance is the raw displacement `|src - tgt|`
//! between aligned word indices.

use thiserror::Error;

use crate::alignment::AlignmentSet;
use crate::conllu::{ParsedSentence, Token};
use crate::corpus::{BitextRecord, ChallengeInstance, ChallengeSet, DepIndex};
use crate::exec::Exec;

pub use crate::corpus::Phenomenon;

pub const DEFAULT_REORDER_THRESHOLD: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DetectorError {
    #[error("head and dependent share index {0}")]
    SameIndex(usize),
    #[error("config {config}: reorder threshold must be at least 1")]
    ZeroReorderThreshold { config: String },
    #[error("config {config} needs {annotation} but no record carries it")]
    MissingAnnotation { config: String, annotation: &'static str },
    #[error("cannot slice {set} (extracted at >= {extracted}) at lower threshold {requested}")]
    ThresholdBelowExtraction {
        set: String,
        extracted: usize,
        requested: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorConfig {
    pub phenomenon: Phenomenon,
    /// Minimum intervening-word count for lexical phenomena.
    pub min_distance: usize,
    /// Minimum aligned-index displacement for reordering.
    pub reorder_threshold: usize,
    pub source_language: String,
    /// Run preposition stranding even for non-English sources.
    pub force_prep_stranding: bool,
}

impl DetectorConfig {
    pub fn lexical(phenomenon: Phenomenon, min_distance: usize, source_language: &str) -> Self {
        DetectorConfig {
            phenomenon,
            min_distance,
            reorder_threshold: DEFAULT_REORDER_THRESHOLD,
            source_language: source_language.to_string(),
            force_prep_stranding: false,
        }
    }

    pub fn reorder(threshold: usize) -> Self {
        DetectorConfig {
            phenomenon: Phenomenon::Reorder,
            min_distance: 0,
            reorder_threshold: threshold,
            source_language: String::new(),
            force_prep_stranding: false,
        }
    }

    /// Threshold applied to instance distances.
    pub fn threshold(&self) -> usize {
        match self.phenomenon {
            Phenomenon::Reorder => self.reorder_threshold,
            _ => self.min_distance,
        }
    }

    pub fn name(&self) -> String {
        set_name(self.phenomenon, self.threshold())
    }

    /// Preposition stranding is an English-source phenomenon unless forced.
    pub fn prep_stranding_enabled(&self) -> bool {
        self.force_prep_stranding || is_english(&self.source_language)
    }
}

fn is_english(tag: &str) -> bool {
    let tag = tag.to_ascii_lowercase();
    tag == "english" || tag == "en" || tag == "eng" || tag.starts_with("en-") || tag.starts_with("en_")
}

pub(crate) fn set_name(phenomenon: Phenomenon, threshold: usize) -> String {
    match phenomenon {
        Phenomenon::Reorder => format!("reorder_t{threshold}"),
        p => format!("{p}_d{threshold}"),
    }
}

/// A rule match within one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub head_index: Option<usize>,
    pub dep_index: DepIndex,
    pub distance: usize,
}

impl Detection {
    pub fn into_instance(self, record_id: usize, phenomenon: Phenomenon) -> ChallengeInstance {
        ChallengeInstance {
            record_id,
            phenomenon,
            head_index: self.head_index,
            dep_index: self.dep_index,
            distance: self.distance,
        }
    }
}

/// Number of syntactic words strictly between two 1-based ids.
pub fn dependency_distance(head_id: usize, dep_id: usize) -> Result<usize, DetectorError> {
    if head_id == dep_id {
        return Err(DetectorError::SameIndex(head_id));
    }
    Ok(head_id.abs_diff(dep_id) - 1)
}

pub fn detect_reordering(a: &AlignmentSet, threshold: usize) -> Option<Detection> {
    let ((src, tgt), d) = a.max_displacement_pair()?;
    (d >= threshold).then_some(Detection {
        head_index: None,
        dep_index: DepIndex::Pair(src, tgt),
        distance: d,
    })
}

fn detect_lexical(s: &ParsedSentence, d: usize, rule: impl Fn(&Token) -> bool) -> Vec<Detection> {
    s.tokens
        .iter()
        .filter(|t| t.head != 0 && rule(t))
        .filter_map(|t| {
            let distance = dependency_distance(t.head, t.id).ok()?;
            (distance >= d).then_some(Detection {
                head_index: Some(t.head),
                dep_index: DepIndex::Word(t.id),
                distance,
            })
        })
        .collect()
}

fn is_reflexive(t: &Token) -> bool {
    t.feats.iter().any(|(k, v)| {
        (k.eq_ignore_ascii_case("reflex") || k.eq_ignore_ascii_case("refl")) && v.eq_ignore_ascii_case("yes")
    })
}

/// Tokens carrying `Reflex=Yes`, paired with their syntactic head.
pub fn detect_reflexive(s: &ParsedSentence, d: usize) -> Vec<Detection> {
    detect_lexical(s, d, is_reflexive)
}

/// Particle dependents (`compound:prt` or `prt`, exact label).
pub fn detect_particle(s: &ParsedSentence, d: usize) -> Vec<Detection> {
    detect_lexical(s, d, |t| t.deprel == "compound:prt" || t.deprel == "prt")
}

/// Adpositions attached by `obl` or an `obl:` subtype.
pub fn detect_prep_stranding(s: &ParsedSentence, d: usize) -> Vec<Detection> {
    detect_lexical(s, d, |t| {
        t.upos == "ADP" && (t.deprel == "obl" || t.deprel.starts_with("obl:"))
    })
}

/// Run one config against one record. `None` means the record lacks the
/// annotation the config needs.
pub fn detect(record: &BitextRecord, config: &DetectorConfig) -> Option<Vec<ChallengeInstance>> {
    let p = config.phenomenon;
    let detections = match p {
        Phenomenon::Reorder => detect_reordering(record.alignment.as_ref()?, config.reorder_threshold)
            .into_iter()
            .collect(),
        Phenomenon::Reflexive => detect_reflexive(record.parse.as_ref()?, config.min_distance),
        Phenomenon::Particle => detect_particle(record.parse.as_ref()?, config.min_distance),
        Phenomenon::PrepStranding => {
            let parse = record.parse.as_ref()?;
            if config.prep_stranding_enabled() {
                detect_prep_stranding(parse, config.min_distance)
            } else {
                Vec::new()
            }
        }
    };
    Some(
        detections
            .into_iter()
            .map(|det| det.into_instance(record.record_id, p))
            .collect(),
    )
}

fn annotation_name(p: Phenomenon) -> &'static str {
    match p {
        Phenomenon::Reorder => "word alignments",
        _ => "dependency parses",
    }
}

fn has_annotation(r: &BitextRecord, p: Phenomenon) -> bool {
    match p {
        Phenomenon::Reorder => r.alignment.is_some(),
        _ => r.parse.is_some(),
    }
}

/// One challenge set per config, records in ascending id order.
///
/// A config whose annotation is carried by no record is an error; records
/// that individually lack it (e.g. unparseable sentences dropped on input)
/// are skipped with a warning.
pub fn extract_challenge_sets(
    records: &[BitextRecord],
    configs: &[DetectorConfig],
    exec: Exec,
) -> Result<Vec<ChallengeSet>, DetectorError> {
    for c in configs {
        if c.phenomenon == Phenomenon::Reorder && c.reorder_threshold == 0 {
            return Err(DetectorError::ZeroReorderThreshold { config: c.name() });
        }
        if !records.is_empty() && !records.iter().any(|r| has_annotation(r, c.phenomenon)) {
            return Err(DetectorError::MissingAnnotation {
                config: c.name(),
                annotation: annotation_name(c.phenomenon),
            });
        }
        if c.phenomenon == Phenomenon::PrepStranding && !c.prep_stranding_enabled() {
            log::warn!(
                "{}: preposition stranding is disabled for source language {:?}",
                c.name(),
                c.source_language
            );
        }
    }

    let per_record: Vec<Vec<Option<Vec<ChallengeInstance>>>> =
        exec.map(records, |r| configs.iter().map(|c| detect(r, c)).collect());

    let sets = configs
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let mut missing = 0usize;
            let mut instances = Vec::new();
            for rec in &per_record {
                match &rec[ci] {
                    Some(found) => instances.extend(found.iter().cloned()),
                    None => missing += 1,
                }
            }
            if missing > 0 {
                log::warn!(
                    "{}: {missing} record(s) without {} skipped",
                    c.name(),
                    annotation_name(c.phenomenon)
                );
            }
            ChallengeSet::new(c.name(), c.phenomenon, c.threshold(), instances)
        })
        .collect();
    Ok(sets)
}

/// Restrict a set to instances with distance `>= τ` for each threshold τ.
pub fn slice_by_distance(set: &ChallengeSet, thresholds: &[usize]) -> Result<Vec<ChallengeSet>, DetectorError> {
    thresholds
        .iter()
        .map(|&tau| {
            if tau < set.min_distance {
                return Err(DetectorError::ThresholdBelowExtraction {
                    set: set.name.clone(),
                    extracted: set.min_distance,
                    requested: tau,
                });
            }
            let instances = set
                .instances
                .iter()
                .filter(|i| i.distance >= tau)
                .cloned()
                .collect();
            Ok(ChallengeSet::new(
                set_name(set.phenomenon, tau),
                set.phenomenon,
                tau,
                instances,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(id: usize, form: &str, upos: &str, head: usize, deprel: &str, feats: &[(&str, &str)]) -> Token {
        Token {
            id,
            form: form.into(),
            lemma: form.into(),
            upos: upos.into(),
            xpos: "_".into(),
            feats: feats.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            head,
            deprel: deprel.into(),
            deps: "_".into(),
            misc: "_".into(),
        }
    }

    /// Fill ids 1..=n with filler words attached to `root`, then overwrite.
    fn sentence(n: usize, root: usize, special: Vec<Token>) -> ParsedSentence {
        let mut tokens: Vec<Token> = (1..=n)
            .map(|i| {
                if i == root {
                    tok(i, "v", "VERB", 0, "root", &[])
                } else {
                    tok(i, "w", "NOUN", root, "obj", &[])
                }
            })
            .collect();
        for t in special {
            let i = t.id - 1;
            tokens[i] = t;
        }
        ParsedSentence {
            sent_id: "t".into(),
            text: None,
            comments: vec![],
            tokens,
            side_lines: vec![],
            warnings: vec![],
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dependency_distance(3, 4), Ok(0));
        assert_eq!(dependency_distance(2, 7), Ok(4));
        assert_eq!(dependency_distance(7, 2), Ok(4));
        assert_eq!(dependency_distance(5, 5), Err(DetectorError::SameIndex(5)));
    }

    #[test]
    fn reordering_examples() {
        let identity: AlignmentSet = (0..18).map(|i| (i, i)).collect();
        assert_eq!(detect_reordering(&identity, 5), None);
        let a: AlignmentSet = [(0, 11), (1, 5)].into_iter().collect();
        let det = detect_reordering(&a, 5).unwrap();
        assert_eq!(det.dep_index, DepIndex::Pair(0, 11));
        assert_eq!(det.distance, 11);
        let a: AlignmentSet = [(2, 6)].into_iter().collect();
        assert_eq!(detect_reordering(&a, 5), None);
        assert!(detect_reordering(&a, 4).is_some());
    }

    #[test]
    fn reflexive_examples() {
        let s = sentence(5, 4, vec![tok(1, "sich", "PRON", 4, "obj", &[("Reflex", "Yes")])]);
        let found = detect_reflexive(&s, 1);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].distance, 2);
        assert_eq!(found[0].head_index, Some(4));
        assert_eq!(found[0].dep_index, DepIndex::Word(1));
        assert!(detect_reflexive(&s, 3).is_empty());
        assert!(detect_reflexive(&sentence(5, 4, vec![]), 0).is_empty());
    }

    #[test]
    fn reflexive_accepts_lowercase_refl() {
        let s = sentence(4, 4, vec![tok(1, "sich", "PRON", 4, "obj", &[("refl", "yes")])]);
        assert_eq!(detect_reflexive(&s, 0).len(), 1);
    }

    #[test]
    fn root_attached_reflexive_is_skipped() {
        let s = sentence(3, 1, vec![tok(1, "sich", "PRON", 0, "root", &[("Reflex", "Yes")])]);
        assert!(detect_reflexive(&s, 0).is_empty());
    }

    #[test]
    fn particle_examples() {
        // ich trat ihm in wahnsinniger Wut entgegen
        let s = sentence(7, 2, vec![tok(7, "entgegen", "ADP", 2, "compound:prt", &[])]);
        let found = detect_particle(&s, 1);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].distance, 4);

        let adj = sentence(5, 3, vec![tok(4, "up", "ADP", 3, "compound:prt", &[])]);
        assert!(detect_particle(&adj, 1).is_empty());
        assert_eq!(detect_particle(&adj, 0).len(), 1);

        let compound = sentence(7, 2, vec![tok(7, "x", "NOUN", 2, "compound", &[])]);
        assert!(detect_particle(&compound, 0).is_empty());

        let prt = sentence(7, 2, vec![tok(7, "x", "PART", 2, "prt", &[])]);
        assert_eq!(detect_particle(&prt, 0).len(), 1);
    }

    #[test]
    fn prep_stranding_examples() {
        let s = sentence(7, 3, vec![tok(6, "to", "ADP", 3, "obl", &[])]);
        let found = detect_prep_stranding(&s, 1);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].distance, 2);

        let sub = sentence(7, 3, vec![tok(6, "to", "ADP", 3, "obl:arg", &[])]);
        assert_eq!(detect_prep_stranding(&sub, 1).len(), 1);

        let part = sentence(7, 3, vec![tok(6, "to", "PART", 3, "obl", &[])]);
        assert!(detect_prep_stranding(&part, 1).is_empty());

        let oblique_prefix = sentence(7, 3, vec![tok(6, "to", "ADP", 3, "oblique", &[])]);
        assert!(detect_prep_stranding(&oblique_prefix, 1).is_empty());
    }

    fn record(id: usize, parse: ParsedSentence) -> BitextRecord {
        let src = vec!["w"; parse.len()].join(" ");
        BitextRecord::new(id, &src, "t").with_parse(parse)
    }

    #[test]
    fn prep_stranding_gated_by_language() {
        let s = sentence(7, 3, vec![tok(6, "to", "ADP", 3, "obl", &[])]);
        let recs = vec![record(0, s)];
        let de = DetectorConfig::lexical(Phenomenon::PrepStranding, 1, "de");
        let en = DetectorConfig::lexical(Phenomenon::PrepStranding, 1, "en");
        let mut forced = de.clone();
        forced.force_prep_stranding = true;
        let sets = extract_challenge_sets(&recs, &[de, en, forced], Exec::Sequential).unwrap();
        assert_eq!(sets.iter().map(|s| s.len()).collect::<Vec<_>>(), vec![0, 1, 1]);
    }

    #[test]
    fn missing_annotation_is_fatal() {
        let recs = vec![BitextRecord::new(0, "a b", "c d")];
        let err = extract_challenge_sets(&recs, &[DetectorConfig::reorder(5)], Exec::Sequential).unwrap_err();
        assert_eq!(
            err,
            DetectorError::MissingAnnotation {
                config: "reorder_t5".into(),
                annotation: "word alignments"
            }
        );
        assert!(extract_challenge_sets(&[], &[DetectorConfig::reorder(5)], Exec::Sequential)
            .unwrap()[0]
            .is_empty());
    }

    #[test]
    fn slicing() {
        let s0 = sentence(8, 1, vec![
            tok(2, "p", "ADP", 1, "compound:prt", &[]),
            tok(6, "q", "ADP", 1, "compound:prt", &[]),
        ]);
        let s1 = sentence(8, 1, vec![tok(3, "p", "ADP", 1, "compound:prt", &[])]);
        let recs = vec![record(0, s0), record(1, s1)];
        let cfg = DetectorConfig::lexical(Phenomenon::Particle, 0, "de");
        let set = &extract_challenge_sets(&recs, &[cfg], Exec::Sequential).unwrap()[0];
        assert_eq!(set.instances.iter().map(|i| i.distance).collect::<Vec<_>>(), vec![0, 4, 1]);

        let slices = slice_by_distance(set, &[0, 1, 3]).unwrap();
        assert_eq!(slices[0].record_ids, set.record_ids);
        assert_eq!(slices[0].instances, set.instances);
        assert_eq!(slices[1].record_ids, vec![0, 1]);
        assert_eq!(slices[2].record_ids, vec![0]);
        assert_eq!(slices[2].name, "particle_d3");

        let d1 = &slices[1];
        assert!(matches!(
            slice_by_distance(d1, &[0]),
            Err(DetectorError::ThresholdBelowExtraction { .. })
        ));
    }

    #[test]
    fn zero_reorder_threshold_rejected() {
        let a: AlignmentSet = [(0, 0)].into_iter().collect();
        let recs = vec![BitextRecord::new(0, "a", "b").with_alignment(a)];
        assert!(extract_challenge_sets(&recs, &[DetectorConfig::reorder(0)], Exec::Sequential).is_err());
    }
}
