//! CoNLL-U (UD v2) reading and writing.
//!
//! Only syntactic words become [`Token`]s. Multiword-token ranges (`4-5`) and
//! empty nodes (`5.1`) are kept aside as [`SideLine`]s so that positional
//! distances are always counted over syntactic words.

use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What to do with a sentence block that fails validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Abort on the first malformed block.
    Strict,
    /// Drop the block and log a warning.
    #[default]
    Skip,
}

/// One syntactic word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: Vec<(String, String)>,
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// Case-insensitive lookup of a morphological feature.
    pub fn feature(&self, key: &str) -> Option<&str> {
        self.feats
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(key))
            .map(|(_, v)| v.as_str())
    }
}

/// A line excluded from the word sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SideLine {
    /// Multiword token spanning words `start..=end`.
    Range { start: usize, end: usize, line: String },
    /// Empty node following word `after` (0 = before the first word).
    Empty { after: usize, line: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSentence {
    pub sent_id: String,
    pub text: Option<String>,
    /// Comment lines other than `sent_id`/`text`, verbatim including `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    pub side_lines: Vec<SideLine>,
    /// Non-fatal well-formedness problems (e.g. root count != 1).
    pub warnings: Vec<String>,
}

impl ParsedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token with the given 1-based id.
    pub fn token(&self, id: usize) -> Option<&Token> {
        id.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Serialize back to CoNLL-U, terminated by the blank separator line.
    pub fn to_conllu(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str(c);
            out.push('\n');
        }
        let _ = writeln!(out, "# sent_id = {}", self.sent_id);
        if let Some(text) = &self.text {
            let _ = writeln!(out, "# text = {text}");
        }
        let emit_empty = |out: &mut String, after: usize| {
            for side in &self.side_lines {
                if let SideLine::Empty { after: a, line } = side {
                    if *a == after {
                        out.push_str(line);
                        out.push('\n');
                    }
                }
            }
        };
        emit_empty(&mut out, 0);
        for tok in &self.tokens {
            for side in &self.side_lines {
                if let SideLine::Range { start, line, .. } = side {
                    if *start == tok.id {
                        out.push_str(line);
                        out.push('\n');
                    }
                }
            }
            let feats = if tok.feats.is_empty() {
                "_".to_string()
            } else {
                tok.feats
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join("|")
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                tok.id,
                tok.form,
                tok.lemma,
                tok.upos,
                tok.xpos,
                feats,
                tok.head,
                tok.deprel,
                tok.deps,
                tok.misc
            );
            emit_empty(&mut out, tok.id);
        }
        out.push('\n');
        out
    }
}

/// Streaming reader yielding one result per sentence block.
///
/// A malformed block yields an `Err` and the reader resynchronizes at the next
/// blank line, so block `k` of the input is always item `k` of the output.
pub struct ConlluReader<R> {
    input: R,
    line_no: usize,
    ordinal: usize,
    buf: String,
    done: bool,
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(input: R) -> Self {
        ConlluReader {
            input,
            line_no: 0,
            ordinal: 0,
            buf: String::new(),
            done: false,
        }
    }

    fn next_line(&mut self) -> Result<Option<String>, std::io::Error> {
        self.buf.clear();
        if self.input.read_line(&mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        let line = self.buf.trim_end_matches(['\n', '\r']);
        Ok(Some(line.to_string()))
    }

    /// Collect the raw lines of the next block along with their line numbers.
    fn next_block(&mut self) -> Result<Option<Vec<(usize, String)>>, std::io::Error> {
        let mut block = Vec::new();
        loop {
            match self.next_line()? {
                None => break,
                Some(line) if line.trim().is_empty() => {
                    if block.is_empty() {
                        continue;
                    }
                    break;
                }
                Some(line) => block.push((self.line_no, line)),
            }
        }
        Ok(if block.is_empty() { None } else { Some(block) })
    }
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = Result<ParsedSentence, ConlluError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_block() {
            Err(e) => {
                self.done = true;
                Some(Err(e.into()))
            }
            Ok(None) => {
                self.done = true;
                None
            }
            Ok(Some(block)) => {
                self.ordinal += 1;
                Some(parse_block(&block, self.ordinal))
            }
        }
    }
}

/// Parse a whole CoNLL-U stream.
///
/// In [`ParseMode::Skip`] malformed blocks are dropped with a warning; I/O
/// errors are always fatal.
pub fn parse_conllu<R: BufRead>(input: R, mode: ParseMode) -> Result<Vec<ParsedSentence>, ConlluError> {
    let mut out = Vec::new();
    for item in ConlluReader::new(input) {
        match item {
            Ok(s) => out.push(s),
            Err(ConlluError::Io(e)) => return Err(e.into()),
            Err(e) if mode == ParseMode::Strict => return Err(e),
            Err(e) => log::warn!("skipping malformed sentence: {e}"),
        }
    }
    Ok(out)
}

fn malformed(line: usize, message: impl Into<String>) -> ConlluError {
    ConlluError::Malformed {
        line,
        message: message.into(),
    }
}

fn parse_feats(field: &str, line: usize) -> Result<Vec<(String, String)>, ConlluError> {
    if field == "_" {
        return Ok(Vec::new());
    }
    let mut feats: Vec<(String, String)> = Vec::new();
    for item in field.split('|') {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| malformed(line, format!("feature without '=': {item:?}")))?;
        if k.is_empty() {
            return Err(malformed(line, format!("empty feature name in {item:?}")));
        }
        if feats.iter().any(|(existing, _)| existing == k) {
            return Err(malformed(line, format!("duplicate feature {k:?}")));
        }
        feats.push((k.to_string(), v.to_string()));
    }
    Ok(feats)
}

fn parse_block(block: &[(usize, String)], ordinal: usize) -> Result<ParsedSentence, ConlluError> {
    let mut sent_id = None;
    let mut text = None;
    let mut comments = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut token_lines = Vec::new();
    let mut side_lines = Vec::new();

    for (line_no, line) in block {
        let line_no = *line_no;
        if let Some(comment) = line.strip_prefix('#') {
            let body = comment.trim_start();
            if let Some(v) = body.strip_prefix("sent_id") {
                let v = v.trim_start();
                let v = v.strip_prefix('=').unwrap_or(v).trim();
                sent_id = Some(v.to_string());
            } else if let Some(v) = body.strip_prefix("text =") {
                text = Some(v.trim().to_string());
            } else {
                comments.push(line.clone());
            }
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(malformed(line_no, format!("expected 10 columns, found {}", cols.len())));
        }
        let id = cols[0];
        if let Some((a, b)) = id.split_once('-') {
            let start = a.parse::<usize>();
            let end = b.parse::<usize>();
            match (start, end) {
                (Ok(start), Ok(end)) if start >= 1 && start <= end => {
                    side_lines.push(SideLine::Range {
                        start,
                        end,
                        line: line.clone(),
                    });
                }
                _ => return Err(malformed(line_no, format!("bad multiword range id {id:?}"))),
            }
            continue;
        }
        if let Some((a, b)) = id.split_once('.') {
            match (a.parse::<usize>(), b.parse::<usize>()) {
                (Ok(after), Ok(_)) => side_lines.push(SideLine::Empty {
                    after,
                    line: line.clone(),
                }),
                _ => return Err(malformed(line_no, format!("bad empty node id {id:?}"))),
            }
            continue;
        }

        let id: usize = id
            .parse()
            .map_err(|_| malformed(line_no, format!("non-integer id {id:?}")))?;
        if id != tokens.len() + 1 {
            return Err(malformed(
                line_no,
                format!("word id {id} out of sequence, expected {}", tokens.len() + 1),
            ));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| malformed(line_no, format!("non-integer head {:?}", cols[6])))?;
        if head == id {
            return Err(malformed(line_no, format!("word {id} is its own head")));
        }
        tokens.push(Token {
            id,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            xpos: cols[4].to_string(),
            feats: parse_feats(cols[5], line_no)?,
            head,
            deprel: cols[7].to_string(),
            deps: cols[8].to_string(),
            misc: cols[9].to_string(),
        });
        token_lines.push(line_no);
    }

    let n = tokens.len();
    for (tok, line_no) in tokens.iter().zip(&token_lines) {
        if tok.head > n {
            return Err(malformed(
                *line_no,
                format!("head {} of word {} exceeds sentence length {n}", tok.head, tok.id),
            ));
        }
    }
    for side in &side_lines {
        if let SideLine::Range { end, .. } = side {
            if *end > n {
                let first = block.first().map(|(l, _)| *l).unwrap_or(0);
                return Err(malformed(first, format!("multiword range ends past word {n}")));
            }
        }
    }

    let sent_id = sent_id.unwrap_or_else(|| format!("s{ordinal}"));
    let mut warnings = Vec::new();
    let roots = tokens.iter().filter(|t| t.head == 0).count();
    if n > 0 && roots != 1 {
        warnings.push(format!("sentence {sent_id} has {roots} root words"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(ParsedSentence {
        sent_id,
        text,
        comments,
        tokens,
        side_lines,
        warnings,
    })
}
