//! Command-line subcommands.
//!
//! Every run writes `run_manifest.json` next to its outputs: the argument
//! vector, the parsed configuration, the seed and generator, and a SHA-256
//! digest of each input. Re-running the recorded argument vector reproduces
//! every output byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conllu::ParseMode;
use crate::corpus::{
    load_bitext_files, read_challenge_set, write_challenge_set, BitextRecord, ChallengeSet, CorpusError,
};
use crate::detectors::{
    extract_challenge_sets, slice_by_distance, DetectorConfig, DetectorError, Phenomenon,
};
use crate::exec::Exec;
use crate::metrics::{
    ribes_sentence, sentence_stats, spearman, BleuStats, MetricsError, RibesParams, RibesReport,
    MAX_ORDER,
};
use crate::permutation::{filter_by_length, holdout_split, Permutation, PermutationError};
use crate::report::{fmt_bleu, fmt_ratio, render_report_tsv, ReportRow, ThresholdTable};
use crate::sampling::{
    challenge_rank, length_matched_corpora, length_score_correlation, mean_lengths, random_corpora,
    substream, SampleReport, SamplingError, GENERATOR,
};
use crate::{TOOL_NAME, TOOL_VERSION};

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const SIZES_FILE: &str = "sizes.tsv";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const REPORT_FILE: &str = "report.tsv";
pub const TABLE_FILE: &str = "table.tsv";
pub const SAMPLE_REPORT_FILE: &str = "sample_report.json";
pub const SAMPLES_FILE: &str = "samples.tsv";
pub const SETS_DIR: &str = "sets";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error("input not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line count mismatch: {left} in {} vs {right} in {}", left_path.display(), right_path.display())]
    LineMismatch {
        left_path: PathBuf,
        left: usize,
        right_path: PathBuf,
        right: usize,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Permutation(#[from] PermutationError),
}

#[derive(Parser, Debug, Clone, Serialize)]
#[command(name = "lddkit", version, about = "Long-distance-dependency challenge sets for MT evaluation")]
pub struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub sequential: bool,

    /// Also report progress notes on standard error.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Extract challenge sets from an annotated bitext.
    Extract(ExtractArgs),
    /// Score hypotheses on the full corpus and on challenge-set slices.
    Evaluate(EvaluateArgs),
    /// Compare a challenge-set score against length-matched control corpora.
    Sample(SampleArgs),
    /// Filter a bitext to one source length and permute source tokens.
    Permute(PermuteArgs),
    /// Render a phenomenon-by-distance table from an evaluation report.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExtractArgs {
    /// Tokenized source sentences, one per line.
    #[arg(long)]
    pub src: PathBuf,
    /// Tokenized target sentences, line-aligned with --src.
    #[arg(long)]
    pub tgt: PathBuf,
    /// CoNLL-U parses of the source side, one block per line of --src.
    #[arg(long)]
    pub conllu: Option<PathBuf>,
    /// Pharaoh alignments, one line per sentence pair.
    #[arg(long)]
    pub align: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![Phenomenon::Reflexive, Phenomenon::Particle])]
    pub phenomena: Vec<Phenomenon>,
    /// Minimum intervening-word counts for lexical phenomena (0 = All).
    #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2, 3])]
    pub thresholds: Vec<usize>,
    #[arg(long, default_value_t = crate::detectors::DEFAULT_REORDER_THRESHOLD)]
    pub reorder_threshold: usize,
    /// Source language tag; preposition stranding runs only for English.
    #[arg(long)]
    pub source_lang: Option<String>,
    #[arg(long)]
    pub force_prep_stranding: bool,
    /// Abort on malformed CoNLL-U instead of skipping the sentence.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, env = "LDDKIT_OUT_DIR", default_value = "lddkit-out")]
    pub out_dir: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Bleu,
    Ribes,
}

impl MetricKind {
    fn as_str(self) -> &'static str {
        match self {
            MetricKind::Bleu => "bleu",
            MetricKind::Ribes => "ribes",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Tsv,
    Json,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvaluateArgs {
    /// System output for the full corpus, one tokenized sentence per line.
    #[arg(long)]
    pub hyp: PathBuf,
    /// Reference translations, line-aligned with --hyp.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Challenge-set directories written by `extract`; may be repeated.
    #[arg(long)]
    pub challenge: Vec<PathBuf>,
    /// Distance slices to score; defaults to each set's own threshold.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bleu")]
    pub metrics: Vec<MetricKind>,
    /// Cap each scored set at this many sentences (seeded selection).
    #[arg(long)]
    pub max_sentences: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.10)]
    pub beta: f64,
    /// What to print on standard output.
    #[arg(long, value_enum, default_value_t = ReportFormat::Tsv)]
    pub format: ReportFormat,
    #[arg(long, env = "LDDKIT_OUT_DIR", default_value = "lddkit-out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SampleArgs {
    /// Challenge-set directory written by `extract`.
    #[arg(long)]
    pub challenge: PathBuf,
    /// Source side of the pool corpus (the corpus the set was extracted from).
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub hyp: Option<PathBuf>,
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Per-sentence scores, one per line; a corpus scores their mean.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MetricKind::Bleu)]
    pub metric: MetricKind,
    #[arg(long, default_value_t = 100)]
    pub n_corpora: usize,
    /// Maximum source-length difference for a matched sentence.
    #[arg(long, default_value_t = 1)]
    pub tolerance: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also draw uniform random corpora of these sizes and correlate their
    /// mean length with their score.
    #[arg(long, value_delimiter = ',')]
    pub random_sizes: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub n_random: usize,
    #[arg(long, env = "LDDKIT_OUT_DIR", default_value = "lddkit-out")]
    pub out_dir: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    /// The fixed 18-position permutation.
    Fixed18,
    Reverse,
    /// Seeded uniform shuffle (see --seed).
    Random,
    /// Space-separated 0-based entries read from --sigma-file.
    File,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PermuteArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long, value_enum, default_value_t = SigmaSource::Fixed18)]
    pub sigma: SigmaSource,
    #[arg(long)]
    pub sigma_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Source length to keep; defaults to 18 for the fixed permutation and
    /// to the most common length otherwise.
    #[arg(long)]
    pub length: Option<usize>,
    /// Hold out this many kept sentences as a test split.
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
    #[arg(long, env = "LDDKIT_OUT_DIR", default_value = "lddkit-out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReportArgs {
    /// `evaluation.json` written by `evaluate`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricKind::Bleu)]
    pub metric: MetricKind,
    #[arg(long, value_enum, default_value_t = ReportFormat::Tsv)]
    pub format: ReportFormat,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Per-run context: the recorded argument vector and execution strategy.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub argv: Vec<String>,
    pub exec: Exec,
}

impl RunContext {
    pub fn new(argv: Vec<String>, exec: Exec) -> Self {
        RunContext { argv, exec }
    }
}

#[derive(Debug, Serialize)]
struct InputDigest {
    path: PathBuf,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    argv: &'a [String],
    config: &'a Command,
    seed: Option<u64>,
    generator: Option<&'static str>,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn require_inputs<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<(), RunError> {
    for p in paths {
        if !p.exists() {
            return Err(RunError::MissingInput(p.clone()));
        }
    }
    Ok(())
}

fn digest_inputs<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<Vec<InputDigest>, RunError> {
    let mut out = Vec::new();
    for p in paths {
        let files: Vec<PathBuf> = if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(io_err(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.is_file())
                .collect();
            entries.sort();
            entries
        } else {
            vec![p.clone()]
        };
        for f in files {
            let bytes = fs::read(&f).map_err(io_err(&f))?;
            out.push(InputDigest {
                path: f,
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
    }
    Ok(out)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut json = serde_json::to_string_pretty(value).expect("report serializes");
    json.push('\n');
    write_file(path, json)
}

fn write_manifest(
    out_dir: &Path,
    ctx: &RunContext,
    config: &Command,
    seed: Option<u64>,
    inputs: &[&PathBuf],
    outputs: &[PathBuf],
) -> Result<(), RunError> {
    let mut rel: Vec<String> = outputs
        .iter()
        .map(|p| p.strip_prefix(out_dir).unwrap_or(p).to_string_lossy().replace('\\', "/"))
        .collect();
    rel.sort();
    let manifest = RunManifest {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        argv: &ctx.argv,
        config,
        seed,
        generator: seed.map(|_| GENERATOR),
        inputs: digest_inputs(inputs.iter().copied())?,
        outputs: rel,
    };
    write_json(&out_dir.join(RUN_MANIFEST), &manifest)
}

fn read_lines(path: &Path) -> Result<Vec<String>, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect())
}

fn tokenize(lines: &[String]) -> Vec<Vec<String>> {
    lines
        .iter()
        .map(|l| l.split_ascii_whitespace().map(str::to_string).collect())
        .collect()
}

fn read_parallel(left: &Path, right: &Path) -> Result<(Vec<String>, Vec<String>), RunError> {
    let l = read_lines(left)?;
    let r = read_lines(right)?;
    if l.len() != r.len() {
        return Err(RunError::LineMismatch {
            left_path: left.to_path_buf(),
            left: l.len(),
            right_path: right.to_path_buf(),
            right: r.len(),
        });
    }
    Ok((l, r))
}

/// Parse arguments, run the subcommand, and write its manifest.
pub fn run(cli: Cli, argv: Vec<String>) -> Result<(), RunError> {
    let ctx = RunContext::new(argv, cli.exec());
    match &cli.command {
        Command::Extract(a) => run_extract(a, &cli.command, &ctx).map(|_| ()),
        Command::Evaluate(a) => run_evaluate(a, &cli.command, &ctx).map(|_| ()),
        Command::Sample(a) => run_sample(a, &cli.command, &ctx).map(|_| ()),
        Command::Permute(a) => run_permute(a, &cli.command, &ctx).map(|_| ()),
        Command::Report(a) => run_report(a),
    }
}

// ---------------------------------------------------------------- extract

/// Extracted sets and the size table.
#[derive(Debug, Clone)]
pub struct ExtractOutput {
    pub sets: Vec<ChallengeSet>,
    pub sizes_tsv: String,
}

fn extract_configs(args: &ExtractArgs) -> Result<Vec<DetectorConfig>, RunError> {
    let mut configs = Vec::new();
    let lang = args.source_lang.clone().unwrap_or_default();
    for &p in &args.phenomena {
        match p {
            Phenomenon::Reorder => {
                if args.align.is_none() {
                    return Err(RunError::Usage(
                        "phenomenon reorder needs word alignments: pass --align".into(),
                    ));
                }
                configs.push(DetectorConfig::reorder(args.reorder_threshold));
            }
            p => {
                if args.conllu.is_none() {
                    return Err(RunError::Usage(format!(
                        "phenomenon {p} needs dependency parses: pass --conllu"
                    )));
                }
                if p == Phenomenon::PrepStranding && args.source_lang.is_none() && !args.force_prep_stranding {
                    return Err(RunError::Usage(
                        "prep_stranding is defined for English sources: pass --source-lang en or --force-prep-stranding"
                            .into(),
                    ));
                }
                for &d in &args.thresholds {
                    let mut c = DetectorConfig::lexical(p, d, &lang);
                    c.force_prep_stranding = args.force_prep_stranding;
                    configs.push(c);
                }
            }
        }
    }
    Ok(configs)
}

fn sizes_table(sets: &[ChallengeSet]) -> String {
    let mut rows: Vec<(Phenomenon, BTreeMap<usize, String>)> = Vec::new();
    for s in sets {
        let at = match rows.iter().position(|(p, _)| *p == s.phenomenon) {
            Some(at) => at,
            None => {
                rows.push((s.phenomenon, BTreeMap::new()));
                rows.len() - 1
            }
        };
        rows[at].1.insert(s.min_distance, s.len().to_string());
    }
    let mut table = ThresholdTable::new();
    for (p, cells) in rows {
        table.push_row(p.as_str(), cells, None);
    }
    table.render_tsv()
}

pub fn run_extract(args: &ExtractArgs, config: &Command, ctx: &RunContext) -> Result<ExtractOutput, RunError> {
    let mut inputs = vec![&args.src, &args.tgt];
    inputs.extend(args.conllu.iter());
    inputs.extend(args.align.iter());
    require_inputs(inputs.iter().copied())?;
    let configs = extract_configs(args)?;

    let mode = if args.strict { ParseMode::Strict } else { ParseMode::Skip };
    let records = load_bitext_files(
        &args.src,
        &args.tgt,
        args.conllu.as_deref(),
        args.align.as_deref(),
        mode,
    )?;
    let mismatched = records.iter().filter(|r| r.parse_len_mismatch).count();
    if mismatched > 0 {
        log::info!("{mismatched} record(s) whose parse length differs from the source tokenization");
    }

    let sets = extract_challenge_sets(&records, &configs, ctx.exec)?;
    let mut outputs = Vec::new();
    for set in &sets {
        let dir = args.out_dir.join(SETS_DIR).join(&set.name);
        outputs.extend(write_challenge_set(set, &records, &dir)?);
    }
    let sizes_tsv = sizes_table(&sets);
    let sizes_path = args.out_dir.join(SIZES_FILE);
    write_file(&sizes_path, &sizes_tsv)?;
    outputs.push(sizes_path);
    write_manifest(&args.out_dir, ctx, config, None, &inputs, &outputs)?;
    print!("{sizes_tsv}");
    Ok(ExtractOutput { sets, sizes_tsv })
}

// --------------------------------------------------------------- evaluate

/// One metric on one scored subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub metric: MetricKind,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precisions: Option<[f64; MAX_ORDER]>,
    pub bp: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nkt: Option<f64>,
    pub hyp_len: u64,
    pub ref_len: u64,
    pub n_sentences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceEvaluation {
    pub phenomenon: String,
    pub set: Option<String>,
    pub min_distance: Option<usize>,
    pub n_sentences: usize,
    pub metrics: Vec<MetricEntry>,
}

impl SliceEvaluation {
    pub fn score(&self, metric: MetricKind) -> Option<f64> {
        self.metrics.iter().find(|m| m.metric == metric).map(|m| m.score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanEntry {
    pub phenomenon: String,
    pub metric: MetricKind,
    pub value: Option<f64>,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub generator: String,
    pub ribes_params: Option<RibesParamsRecord>,
    pub baseline: SliceEvaluation,
    pub slices: Vec<SliceEvaluation>,
    pub spearman: Vec<SpearmanEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RibesParamsRecord {
    pub alpha: f64,
    pub beta: f64,
}

struct SentenceScores {
    bleu: Vec<BleuStats>,
    ribes: Option<Vec<RibesReport>>,
}

impl SentenceScores {
    fn compute(hyps: &[Vec<String>], refs: &[Vec<String>], ribes: Option<RibesParams>, exec: Exec) -> Self {
        let bleu = exec.map_range(hyps.len(), |i| sentence_stats(&hyps[i], &refs[i]));
        let ribes = ribes.map(|p| exec.map_range(hyps.len(), |i| ribes_sentence(&hyps[i], &refs[i], p)));
        SentenceScores { bleu, ribes }
    }

    fn entries(&self, ids: &[usize], metrics: &[MetricKind]) -> Vec<MetricEntry> {
        if ids.is_empty() {
            return Vec::new();
        }
        let stats: BleuStats = ids.iter().map(|&i| self.bleu[i]).sum();
        metrics
            .iter()
            .filter_map(|m| match m {
                MetricKind::Bleu => {
                    let r = stats.report();
                    Some(MetricEntry {
                        metric: MetricKind::Bleu,
                        score: r.score,
                        precisions: Some(r.precisions),
                        bp: r.bp,
                        nkt: None,
                        hyp_len: r.hyp_len,
                        ref_len: r.ref_len,
                        n_sentences: ids.len(),
                    })
                }
                MetricKind::Ribes => {
                    let sent = self.ribes.as_ref()?;
                    let n = ids.len() as f64;
                    let mean = |f: fn(&RibesReport) -> f64| ids.iter().map(|&i| f(&sent[i])).sum::<f64>() / n;
                    Some(MetricEntry {
                        metric: MetricKind::Ribes,
                        score: mean(|r| r.score),
                        precisions: None,
                        bp: mean(|r| r.bp),
                        nkt: Some(mean(|r| r.nkt)),
                        hyp_len: stats.hyp_len,
                        ref_len: stats.ref_len,
                        n_sentences: ids.len(),
                    })
                }
            })
            .collect()
    }
}

fn cap_ids(ids: &[usize], max: Option<usize>, seed: u64, ordinal: usize) -> Vec<usize> {
    match max {
        Some(m) if ids.len() > m => {
            let mut rng = substream(seed, ordinal);
            let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, ids.len(), m)
                .into_iter()
                .map(|i| ids[i])
                .collect();
            picked.sort_unstable();
            picked
        }
        _ => ids.to_vec(),
    }
}

pub fn run_evaluate(
    args: &EvaluateArgs,
    config: &Command,
    ctx: &RunContext,
) -> Result<EvaluationReport, RunError> {
    let mut inputs = vec![&args.hyp, &args.reference];
    inputs.extend(args.challenge.iter());
    require_inputs(inputs.iter().copied())?;
    if args.metrics.is_empty() {
        return Err(RunError::Usage("--metrics must name at least one metric".into()));
    }

    let (hyp_lines, ref_lines) = read_parallel(&args.hyp, &args.reference)?;
    let hyps = tokenize(&hyp_lines);
    let refs = tokenize(&ref_lines);
    let ribes_params = args.metrics.contains(&MetricKind::Ribes).then_some(RibesParams {
        alpha: args.alpha,
        beta: args.beta,
    });
    let scores = SentenceScores::compute(&hyps, &refs, ribes_params, ctx.exec);

    let all: Vec<usize> = (0..hyps.len()).collect();
    let base_ids = cap_ids(&all, args.max_sentences, args.seed, 0);
    let baseline = SliceEvaluation {
        phenomenon: "baseline".into(),
        set: None,
        min_distance: None,
        n_sentences: base_ids.len(),
        metrics: scores.entries(&base_ids, &args.metrics),
    };

    let sets = args
        .challenge
        .iter()
        .map(|dir| read_challenge_set(dir))
        .collect::<Result<Vec<_>, _>>()?;
    let label_of = |set: &ChallengeSet| {
        let shared = sets.iter().filter(|s| s.phenomenon == set.phenomenon).count() > 1;
        if shared {
            set.name.clone()
        } else {
            set.phenomenon.to_string()
        }
    };

    let mut slices = Vec::new();
    let mut spearmans = Vec::new();
    let mut ordinal = 0usize;
    for set in &sets {
        if let Some(&bad) = set.record_ids.iter().find(|&&id| id >= hyps.len()) {
            return Err(RunError::Corpus(CorpusError::UnknownRecord(bad)));
        }
        let thresholds = if args.thresholds.is_empty() {
            vec![set.min_distance]
        } else {
            args.thresholds.clone()
        };
        let label = label_of(set);
        let mut points = Vec::new();
        for slice in slice_by_distance(set, &thresholds)? {
            ordinal += 1;
            let ids = cap_ids(&slice.record_ids, args.max_sentences, args.seed, ordinal);
            let eval = SliceEvaluation {
                phenomenon: label.clone(),
                set: Some(set.name.clone()),
                min_distance: Some(slice.min_distance),
                n_sentences: ids.len(),
                metrics: scores.entries(&ids, &args.metrics),
            };
            if let Some(score) = eval.score(MetricKind::Bleu) {
                points.push((slice.min_distance as f64, score));
            }
            slices.push(eval);
        }
        if thresholds.len() >= 2 && args.metrics.contains(&MetricKind::Bleu) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
            let value = match spearman(&xs, &ys) {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("{label}: Spearman undefined: {e}");
                    None
                }
            };
            spearmans.push(SpearmanEntry {
                phenomenon: label,
                metric: MetricKind::Bleu,
                value,
                n_points: points.len(),
            });
        }
    }

    let report = EvaluationReport {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        seed: args.seed,
        generator: GENERATOR.into(),
        ribes_params: ribes_params.map(|p| RibesParamsRecord {
            alpha: p.alpha,
            beta: p.beta,
        }),
        baseline,
        slices,
        spearman: spearmans,
    };

    let json_path = args.out_dir.join(EVALUATION_FILE);
    write_json(&json_path, &report)?;
    let report_path = args.out_dir.join(REPORT_FILE);
    let report_tsv = render_report_tsv(&report_rows(&report));
    write_file(&report_path, &report_tsv)?;
    let table_path = args.out_dir.join(TABLE_FILE);
    let table = distance_table(&report, MetricKind::Bleu);
    write_file(&table_path, &table)?;
    write_manifest(
        &args.out_dir,
        ctx,
        config,
        Some(args.seed),
        &inputs,
        &[json_path, report_path, table_path],
    )?;

    match args.format {
        ReportFormat::Tsv => print!("{table}"),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(report)
}

fn spearman_for(report: &EvaluationReport, phenomenon: &str) -> Option<f64> {
    report
        .spearman
        .iter()
        .find(|s| s.phenomenon == phenomenon)
        .and_then(|s| s.value)
}

/// Long-format rows: the baseline first, then every slice.
pub fn report_rows(report: &EvaluationReport) -> Vec<ReportRow> {
    std::iter::once(&report.baseline)
        .chain(&report.slices)
        .map(|s| ReportRow {
            phenomenon: s.phenomenon.clone(),
            min_distance: s.min_distance,
            n_sentences: s.n_sentences,
            bleu: s.score(MetricKind::Bleu),
            ribes: s.score(MetricKind::Ribes),
            spearman: spearman_for(report, &s.phenomenon),
        })
        .collect()
}

/// Phenomena by minimum distance, one metric per cell, with a Spearman column
/// when any phenomenon has at least two slices.
pub fn distance_table(report: &EvaluationReport, metric: MetricKind) -> String {
    let mut order: Vec<String> = Vec::new();
    let mut cells: BTreeMap<String, BTreeMap<usize, String>> = BTreeMap::new();
    let mut points: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for s in &report.slices {
        let Some(d) = s.min_distance else { continue };
        if !order.contains(&s.phenomenon) {
            order.push(s.phenomenon.clone());
        }
        let score = s.score(metric);
        let text = match metric {
            MetricKind::Bleu => fmt_bleu(score),
            MetricKind::Ribes => fmt_ratio(score),
        };
        cells.entry(s.phenomenon.clone()).or_default().insert(d, text);
        if let Some(v) = score {
            points.entry(s.phenomenon.clone()).or_default().push((d as f64, v));
        }
    }
    let multi = cells.values().any(|c| c.len() >= 2);
    let mut table = ThresholdTable::new();
    if multi {
        table = table.with_trailing_column("spearman");
    }
    for p in &order {
        let rho = (cells[p].len() >= 2)
            .then(|| {
                let pts = points.get(p)?;
                let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
                spearman(&xs, &ys).ok()
            })
            .flatten();
        table.push_row(p, cells[p].clone(), rho.map(|r| format!("{r:.2}")));
    }
    table.render_tsv()
}

// ----------------------------------------------------------------- sample

enum CorpusScorer {
    Bleu(Vec<BleuStats>),
    Mean(Vec<f64>),
}

impl CorpusScorer {
    fn score(&self, ids: &[usize]) -> f64 {
        match self {
            CorpusScorer::Bleu(stats) => ids.iter().map(|&i| stats[i]).sum::<BleuStats>().report().score,
            CorpusScorer::Mean(v) => {
                if ids.is_empty() {
                    0.0
                } else {
                    ids.iter().map(|&i| v[i]).sum::<f64>() / ids.len() as f64
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomCorrelation {
    pub size: usize,
    pub n_corpora: usize,
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleOutput {
    pub challenge: String,
    pub phenomenon: Phenomenon,
    pub metric: String,
    pub tolerance: usize,
    pub n_sentences: usize,
    pub with_replacement_draws: usize,
    pub correlation_method: &'static str,
    /// Mean source length vs score over the matched corpora.
    pub length_score_correlation: Option<f64>,
    pub random_corpora: Vec<RandomCorrelation>,
    #[serde(flatten)]
    pub report: SampleReport,
}

pub fn run_sample(args: &SampleArgs, config: &Command, ctx: &RunContext) -> Result<SampleOutput, RunError> {
    let mut inputs = vec![&args.challenge, &args.src];
    inputs.extend(args.hyp.iter());
    inputs.extend(args.reference.iter());
    inputs.extend(args.scores.iter());
    require_inputs(inputs.iter().copied())?;

    let src = read_lines(&args.src)?;
    let pool: Vec<BitextRecord> = src
        .iter()
        .enumerate()
        .map(|(i, l)| BitextRecord::new(i, l, ""))
        .collect();

    let scorer = match (&args.scores, &args.hyp, &args.reference) {
        (Some(path), _, _) => {
            let lines = read_lines(path)?;
            let values = lines
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    l.trim().parse::<f64>().map_err(|_| RunError::Format {
                        path: path.clone(),
                        message: format!("line {}: not a number: {l:?}", i + 1),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != pool.len() {
                return Err(RunError::LineMismatch {
                    left_path: args.src.clone(),
                    left: pool.len(),
                    right_path: path.clone(),
                    right: values.len(),
                });
            }
            CorpusScorer::Mean(values)
        }
        (None, Some(hyp), Some(reference)) => {
            let (h, r) = read_parallel(hyp, reference)?;
            if h.len() != pool.len() {
                return Err(RunError::LineMismatch {
                    left_path: args.src.clone(),
                    left: pool.len(),
                    right_path: hyp.clone(),
                    right: h.len(),
                });
            }
            let (h, r) = (tokenize(&h), tokenize(&r));
            match args.metric {
                MetricKind::Bleu => {
                    CorpusScorer::Bleu(ctx.exec.map_range(h.len(), |i| sentence_stats(&h[i], &r[i])))
                }
                MetricKind::Ribes => CorpusScorer::Mean(
                    ctx.exec
                        .map_range(h.len(), |i| ribes_sentence(&h[i], &r[i], RibesParams::default()).score),
                ),
            }
        }
        _ => {
            return Err(RunError::Usage(
                "sample needs per-sentence --scores or both --hyp and --ref".into(),
            ))
        }
    };
    let metric = if args.scores.is_some() {
        "mean_sentence_score".to_string()
    } else {
        args.metric.as_str().to_string()
    };

    let challenge = read_challenge_set(&args.challenge)?;
    let sampled = length_matched_corpora(
        &challenge,
        &pool,
        args.n_corpora,
        args.tolerance,
        args.seed,
        ctx.exec,
    )?;
    let sample_scores = ctx.exec.map(&sampled.corpora, |c| scorer.score(c));
    let challenge_score = scorer.score(&challenge.record_ids);
    let report = challenge_rank(challenge_score, &sample_scores, args.seed);

    let lengths = if challenge.is_empty() {
        vec![0.0; sampled.corpora.len()]
    } else {
        mean_lengths(&sampled.corpora, &pool)?
    };
    let length_corr = if challenge.is_empty() {
        None
    } else {
        length_score_correlation(&sampled.corpora, &pool, &sample_scores).ok()
    };

    let mut random = Vec::new();
    for &size in &args.random_sizes {
        let seed = args.seed ^ (size as u64).rotate_left(32);
        let corpora = random_corpora(&pool, size, args.n_random, seed, ctx.exec)?;
        let scores = ctx.exec.map(&corpora, |c| scorer.score(c));
        let r = length_score_correlation(&corpora, &pool, &scores);
        if let Err(e) = &r {
            log::warn!("random corpora of size {size}: correlation undefined: {e}");
        }
        random.push(RandomCorrelation {
            size,
            n_corpora: args.n_random,
            pearson: r.ok(),
        });
    }

    let output = SampleOutput {
        challenge: challenge.name.clone(),
        phenomenon: challenge.phenomenon,
        metric,
        tolerance: args.tolerance,
        n_sentences: challenge.len(),
        with_replacement_draws: sampled.with_replacement_draws,
        correlation_method: "pearson",
        length_score_correlation: length_corr,
        random_corpora: random,
        report,
    };

    let json_path = args.out_dir.join(SAMPLE_REPORT_FILE);
    write_json(&json_path, &output)?;
    let mut tsv = String::from("corpus_index\tmean_length\tscore\n");
    for (i, (len, score)) in lengths.iter().zip(&output.report.sample_scores).enumerate() {
        tsv.push_str(&format!("{i}\t{len}\t{score}\n"));
    }
    let tsv_path = args.out_dir.join(SAMPLES_FILE);
    write_file(&tsv_path, tsv)?;
    write_manifest(&args.out_dir, ctx, config, Some(args.seed), &inputs, &[json_path, tsv_path])?;

    let r = &output.report;
    if r.below_all {
        println!(
            "{}: {} {:.2} is below all {} sampled corpora",
            output.challenge, output.metric, r.challenge_score, r.n_corpora
        );
    } else {
        println!(
            "{}: {} {:.2}; {} of {} sampled corpora score at or below it (p = {:.3})",
            output.challenge, output.metric, r.challenge_score, r.rank, r.n_corpora, r.empirical_p
        );
    }
    Ok(output)
}

// ---------------------------------------------------------------- permute

#[derive(Debug, Clone, PartialEq)]
pub struct PermuteOutput {
    pub permutation: Permutation,
    pub length: usize,
    pub kept: usize,
    pub total: usize,
}

fn lines_text<'a>(lines: impl IntoIterator<Item = &'a String>) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(l);
        out.push('\n');
    }
    out
}

pub fn run_permute(args: &PermuteArgs, config: &Command, ctx: &RunContext) -> Result<PermuteOutput, RunError> {
    let mut inputs = vec![&args.src, &args.tgt];
    inputs.extend(args.sigma_file.iter());
    require_inputs(inputs.iter().copied())?;
    let (src, tgt) = read_parallel(&args.src, &args.tgt)?;

    let histogram_only = filter_by_length(&src, 0);
    let length = match (args.length, args.sigma) {
        (Some(l), _) => l,
        (None, SigmaSource::Fixed18) => 18,
        (None, SigmaSource::File) => {
            let path = args.sigma_file.as_ref().ok_or_else(|| RunError::Usage("--sigma file needs --sigma-file".into()))?;
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            text.split_whitespace().count()
        }
        (None, _) => histogram_only
            .most_common_length()
            .ok_or_else(|| RunError::Usage("empty corpus: pass --length".into()))?,
    };
    let permutation = match args.sigma {
        SigmaSource::Fixed18 => Permutation::sigma18(),
        SigmaSource::Reverse => Permutation::reverse(length),
        SigmaSource::Random => Permutation::random(length, args.seed),
        SigmaSource::File => {
            let path = args
                .sigma_file
                .as_ref()
                .ok_or_else(|| RunError::Usage("--sigma file needs --sigma-file".into()))?;
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            text.parse::<Permutation>()?
        }
    };
    if permutation.len() != length {
        return Err(RunError::Usage(format!(
            "permutation has length {} but --length is {length}",
            permutation.len()
        )));
    }

    let filtered = filter_by_length(&src, length);
    if filtered.kept.is_empty() {
        log::warn!("no source sentence has length {length}; outputs will be empty");
    }
    let regular: Vec<String> = filtered.kept.iter().map(|&i| src[i].clone()).collect();
    let targets: Vec<String> = filtered.kept.iter().map(|&i| tgt[i].clone()).collect();
    let permuted_tokens = ctx.exec.map(&regular, |line| {
        let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
        permutation.apply(&tokens).map(|t| t.join(" "))
    });
    let permuted = permuted_tokens.into_iter().collect::<Result<Vec<_>, _>>()?;

    let out = &args.out_dir;
    let mut outputs = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<(), RunError> {
        let p = out.join(name);
        write_file(&p, text)?;
        outputs.push(p);
        Ok(())
    };
    emit("source.txt", lines_text(&permuted))?;
    emit("source.regular.txt", lines_text(&regular))?;
    emit("target.txt", lines_text(&targets))?;
    emit("permutation.txt", format!("{permutation}\n"))?;
    let mut hist = String::from("length\tcount\n");
    for (len, count) in &filtered.histogram {
        hist.push_str(&format!("{len}\t{count}\n"));
    }
    emit("length_histogram.tsv", hist)?;
    if args.holdout > 0 {
        let (train, test) = holdout_split(permuted.len(), args.holdout, args.seed);
        for (prefix, idx) in [("train", &train), ("test", &test)] {
            emit(&format!("{prefix}.source.txt"), lines_text(idx.iter().map(|&i| &permuted[i])))?;
            emit(&format!("{prefix}.source.regular.txt"), lines_text(idx.iter().map(|&i| &regular[i])))?;
            emit(&format!("{prefix}.target.txt"), lines_text(idx.iter().map(|&i| &targets[i])))?;
        }
    }
    let seeded = matches!(args.sigma, SigmaSource::Random) || args.holdout > 0;
    write_manifest(out, ctx, config, seeded.then_some(args.seed), &inputs, &outputs)?;
    println!(
        "kept {} of {} sentence pairs with source length {length}; permutation: {permutation}",
        permuted.len(),
        src.len()
    );
    Ok(PermuteOutput {
        permutation,
        length,
        kept: permuted.len(),
        total: src.len(),
    })
}

// ----------------------------------------------------------------- report

pub fn run_report(args: &ReportArgs) -> Result<(), RunError> {
    require_inputs([&args.input])?;
    let text = fs::read_to_string(&args.input).map_err(io_err(&args.input))?;
    let report: EvaluationReport = serde_json::from_str(&text).map_err(|e| RunError::Format {
        path: args.input.clone(),
        message: e.to_string(),
    })?;
    let rendered = match args.format {
        ReportFormat::Tsv => distance_table(&report, args.metric),
        ReportFormat::Json => {
            let rows: Vec<serde_json::Value> = report_rows(&report)
                .into_iter()
                .map(|r| {
                    serde_json::json!({
                        "phenomenon": r.phenomenon,
                        "min_distance": r.min_distance,
                        "n_sentences": r.n_sentences,
                        "bleu": r.bleu,
                        "ribes": r.ribes,
                        "spearman": r.spearman,
                    })
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
            s.push('\n');
            s
        }
    };
    match &args.out {
        Some(path) => write_file(path, rendered),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(rendered.as_bytes()).map_err(io_err(Path::new("<stdout>")))
        }
    }
}
