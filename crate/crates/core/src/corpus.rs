//! Bitext records and challenge-set persistence.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{parse_pharaoh, AlignmentError, AlignmentSet};
use crate::conllu::{ConlluError, ConlluReader, ParseMode, ParsedSentence};

pub const SOURCE_FILE: &str = "source.txt";
pub const TARGET_FILE: &str = "target.txt";
pub const INSTANCES_FILE: &str = "instances.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("length mismatch {left} vs {right} ({what})")]
    LengthMismatch {
        what: String,
        left: usize,
        right: usize,
    },
    #[error("record {record}: alignment index ({src}, {tgt}) outside sentence lengths ({src_len}, {tgt_len})")]
    AlignmentMismatch {
        record: usize,
        src: usize,
        tgt: usize,
        src_len: usize,
        tgt_len: usize,
    },
    #[error("record {0} not present in the bitext")]
    UnknownRecord(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Conllu(#[from] ConlluError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Read(#[from] std::io::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// The four detectable phenomena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phenomenon {
    Reorder,
    Reflexive,
    Particle,
    PrepStranding,
}

impl Phenomenon {
    pub const ALL: [Phenomenon; 4] = [
        Phenomenon::Reorder,
        Phenomenon::Reflexive,
        Phenomenon::Particle,
        Phenomenon::PrepStranding,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phenomenon::Reorder => "reorder",
            Phenomenon::Reflexive => "reflexive",
            Phenomenon::Particle => "particle",
            Phenomenon::PrepStranding => "prep_stranding",
        }
    }

    pub fn is_lexical(self) -> bool {
        self != Phenomenon::Reorder
    }
}

impl fmt::Display for Phenomenon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phenomenon {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phenomenon::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown phenomenon {s:?} (expected reorder, reflexive, particle or prep_stranding)"))
    }
}

/// One sentence pair with its optional annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct BitextRecord {
    pub record_id: usize,
    pub src_line: String,
    pub tgt_line: String,
    pub src_tokens: Vec<String>,
    pub tgt_tokens: Vec<String>,
    pub parse: Option<ParsedSentence>,
    pub alignment: Option<AlignmentSet>,
    /// Parser word count differs from the source token count.
    pub parse_len_mismatch: bool,
}

impl BitextRecord {
    pub fn new(record_id: usize, src_line: &str, tgt_line: &str) -> Self {
        BitextRecord {
            record_id,
            src_line: src_line.to_string(),
            tgt_line: tgt_line.to_string(),
            src_tokens: src_line.split_ascii_whitespace().map(str::to_string).collect(),
            tgt_tokens: tgt_line.split_ascii_whitespace().map(str::to_string).collect(),
            parse: None,
            alignment: None,
            parse_len_mismatch: false,
        }
    }

    pub fn with_parse(mut self, parse: ParsedSentence) -> Self {
        self.set_parse(parse);
        self
    }

    pub fn set_parse(&mut self, parse: ParsedSentence) {
        self.parse_len_mismatch = parse.tokens.len() != self.src_tokens.len();
        self.parse = Some(parse);
    }

    pub fn with_alignment(mut self, alignment: AlignmentSet) -> Self {
        self.alignment = Some(alignment);
        self
    }

    pub fn src_len(&self) -> usize {
        self.src_tokens.len()
    }
}

fn read_lines(input: &mut dyn BufRead) -> Result<Vec<String>, std::io::Error> {
    input
        .lines()
        .map(|l| l.map(|l| l.trim_end_matches('\r').to_string()))
        .collect()
}

/// Join source, target and optional parse/alignment streams by line number.
pub fn load_bitext(
    src: &mut dyn BufRead,
    tgt: &mut dyn BufRead,
    parses: Option<&mut dyn BufRead>,
    alignments: Option<&mut dyn BufRead>,
    mode: ParseMode,
) -> Result<Vec<BitextRecord>, CorpusError> {
    let src = read_lines(src)?;
    let tgt = read_lines(tgt)?;
    if src.len() != tgt.len() {
        return Err(CorpusError::LengthMismatch {
            what: "source vs target lines".into(),
            left: src.len(),
            right: tgt.len(),
        });
    }
    let mut records: Vec<BitextRecord> = src
        .iter()
        .zip(&tgt)
        .enumerate()
        .map(|(i, (s, t))| BitextRecord::new(i, s, t))
        .collect();

    if let Some(parses) = parses {
        let mut blocks = Vec::with_capacity(records.len());
        for (i, item) in ConlluReader::new(parses).enumerate() {
            match item {
                Ok(s) => blocks.push(Some(s)),
                Err(ConlluError::Io(e)) => return Err(e.into()),
                Err(e) if mode == ParseMode::Strict => return Err(e.into()),
                Err(e) => {
                    log::warn!("record {i}: dropping unparseable sentence: {e}");
                    blocks.push(None);
                }
            }
        }
        if blocks.len() != records.len() {
            return Err(CorpusError::LengthMismatch {
                what: "source lines vs parsed sentences".into(),
                left: records.len(),
                right: blocks.len(),
            });
        }
        for (rec, parse) in records.iter_mut().zip(blocks) {
            if let Some(parse) = parse {
                rec.set_parse(parse);
            }
        }
    }

    if let Some(alignments) = alignments {
        let aligns = parse_pharaoh(alignments)?;
        if aligns.len() != records.len() {
            return Err(CorpusError::LengthMismatch {
                what: "source lines vs alignment lines".into(),
                left: records.len(),
                right: aligns.len(),
            });
        }
        for (rec, a) in records.iter_mut().zip(aligns) {
            if let Some((s, t)) = a.max_indices() {
                if s >= rec.src_tokens.len() || t >= rec.tgt_tokens.len() {
                    return Err(CorpusError::AlignmentMismatch {
                        record: rec.record_id,
                        src: s,
                        tgt: t,
                        src_len: rec.src_tokens.len(),
                        tgt_len: rec.tgt_tokens.len(),
                    });
                }
            }
            rec.alignment = Some(a);
        }
    }

    Ok(records)
}

fn open(path: &Path) -> Result<std::io::BufReader<fs::File>, CorpusError> {
    fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(io_err(path))
}

/// File-based wrapper around [`load_bitext`].
pub fn load_bitext_files(
    src: &Path,
    tgt: &Path,
    parses: Option<&Path>,
    alignments: Option<&Path>,
    mode: ParseMode,
) -> Result<Vec<BitextRecord>, CorpusError> {
    let mut s = open(src)?;
    let mut t = open(tgt)?;
    let mut p = parses.map(open).transpose()?;
    let mut a = alignments.map(open).transpose()?;
    load_bitext(
        &mut s,
        &mut t,
        p.as_mut().map(|r| r as &mut dyn BufRead),
        a.as_mut().map(|r| r as &mut dyn BufRead),
        mode,
    )
}

/// Dependent position of an instance: a 1-based CoNLL-U id for lexical
/// phenomena, a 0-based `(src, tgt)` alignment pair for reordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DepIndex {
    Word(usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeInstance {
    pub record_id: usize,
    pub phenomenon: Phenomenon,
    pub head_index: Option<usize>,
    pub dep_index: DepIndex,
    pub distance: usize,
}

/// Sentences selected for one phenomenon at one threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeSet {
    pub name: String,
    pub phenomenon: Phenomenon,
    pub min_distance: usize,
    pub record_ids: Vec<usize>,
    pub instances: Vec<ChallengeInstance>,
}

impl ChallengeSet {
    /// Build a set; instances are stably ordered by record and `record_ids`
    /// derived from them.
    pub fn new(
        name: impl Into<String>,
        phenomenon: Phenomenon,
        min_distance: usize,
        mut instances: Vec<ChallengeInstance>,
    ) -> Self {
        instances.sort_by_key(|i| i.record_id);
        let mut record_ids: Vec<usize> = instances.iter().map(|i| i.record_id).collect();
        record_ids.dedup();
        ChallengeSet {
            name: name.into(),
            phenomenon,
            min_distance,
            record_ids,
            instances,
        }
    }

    /// Size in sentences.
    pub fn len(&self) -> usize {
        self.record_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeManifest {
    pub name: String,
    pub phenomenon: Phenomenon,
    pub min_distance: usize,
    pub n_sentences: usize,
    pub n_instances: usize,
}

fn find_record(records: &[BitextRecord], id: usize) -> Option<&BitextRecord> {
    match records.get(id) {
        Some(r) if r.record_id == id => Some(r),
        _ => records
            .binary_search_by_key(&id, |r| r.record_id)
            .ok()
            .map(|i| &records[i]),
    }
}

/// Write `source.txt`, `target.txt`, `instances.jsonl` and `manifest.json`
/// into `out_dir`. Returns the paths written.
pub fn write_challenge_set(
    set: &ChallengeSet,
    records: &[BitextRecord],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CorpusError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let src_path = out_dir.join(SOURCE_FILE);
    let tgt_path = out_dir.join(TARGET_FILE);
    let inst_path = out_dir.join(INSTANCES_FILE);
    let manifest_path = out_dir.join(MANIFEST_FILE);

    let mut src = String::new();
    let mut tgt = String::new();
    for &id in &set.record_ids {
        let rec = find_record(records, id).ok_or(CorpusError::UnknownRecord(id))?;
        src.push_str(&rec.src_line);
        src.push('\n');
        tgt.push_str(&rec.tgt_line);
        tgt.push('\n');
    }
    fs::write(&src_path, src).map_err(io_err(&src_path))?;
    fs::write(&tgt_path, tgt).map_err(io_err(&tgt_path))?;

    let file = fs::File::create(&inst_path).map_err(io_err(&inst_path))?;
    let mut w = BufWriter::new(file);
    for inst in &set.instances {
        let line = serde_json::to_string(inst).expect("instance serializes");
        writeln!(w, "{line}").map_err(io_err(&inst_path))?;
    }
    w.flush().map_err(io_err(&inst_path))?;

    let manifest = ChallengeManifest {
        name: set.name.clone(),
        phenomenon: set.phenomenon,
        min_distance: set.min_distance,
        n_sentences: set.len(),
        n_instances: set.instances.len(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&manifest_path, json).map_err(io_err(&manifest_path))?;

    Ok(vec![src_path, tgt_path, inst_path, manifest_path])
}

/// Read an instances file (JSON lines).
pub fn read_instances(path: &Path) -> Result<Vec<ChallengeInstance>, CorpusError> {
    let reader = open(path)?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = serde_json::from_str(&line).map_err(|e| CorpusError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(inst);
    }
    Ok(out)
}

/// Read a challenge-set directory written by [`write_challenge_set`].
pub fn read_challenge_set(dir: &Path) -> Result<ChallengeSet, CorpusError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: ChallengeManifest =
        serde_json::from_str(&text).map_err(|e| CorpusError::Format {
            path: manifest_path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
    let instances = read_instances(&dir.join(INSTANCES_FILE))?;
    Ok(ChallengeSet::new(
        manifest.name,
        manifest.phenomenon,
        manifest.min_distance,
        instances,
    ))
}
