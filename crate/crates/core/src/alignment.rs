//! Pharaoh-format word alignments (`i-j` pairs, 0-based).

use std::collections::BTreeSet;
use std::io::BufRead;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("line {line}: malformed alignment token {token:?}")]
    BadToken { line: usize, token: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Source/target alignment pairs of one sentence pair, deduplicated and
/// kept in lexicographic order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentSet {
    pairs: BTreeSet<(usize, usize)>,
}

impl AlignmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, src: usize, tgt: usize) {
        self.pairs.insert((src, tgt));
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    /// Largest source and target index, if any.
    pub fn max_indices(&self) -> Option<(usize, usize)> {
        let src = self.pairs.iter().map(|p| p.0).max()?;
        let tgt = self.pairs.iter().map(|p| p.1).max()?;
        Some((src, tgt))
    }

    /// The lexicographically smallest pair achieving the maximum `|src - tgt|`.
    pub fn max_displacement_pair(&self) -> Option<((usize, usize), usize)> {
        let mut best: Option<((usize, usize), usize)> = None;
        for &(s, t) in &self.pairs {
            let d = s.abs_diff(t);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some(((s, t), d));
            }
        }
        best
    }

    pub fn to_pharaoh(&self) -> String {
        self.pairs
            .iter()
            .map(|(s, t)| format!("{s}-{t}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl FromIterator<(usize, usize)> for AlignmentSet {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        AlignmentSet {
            pairs: iter.into_iter().collect(),
        }
    }
}

fn parse_line_at(line: &str, line_no: usize) -> Result<AlignmentSet, AlignmentError> {
    let bad = |token: &str| AlignmentError::BadToken {
        line: line_no,
        token: token.to_string(),
    };
    line.split_ascii_whitespace()
        .map(|token| {
            let (s, t) = token.split_once('-').ok_or_else(|| bad(token))?;
            let s = s.parse::<usize>().map_err(|_| bad(token))?;
            let t = t.parse::<usize>().map_err(|_| bad(token))?;
            Ok((s, t))
        })
        .collect()
}

/// Parse one Pharaoh line such as `0-0 1-2 2-1`.
pub fn parse_pharaoh_line(line: &str) -> Result<AlignmentSet, AlignmentError> {
    parse_line_at(line, 1)
}

/// Parse a whole alignment file, one line per sentence pair.
pub fn parse_pharaoh<R: BufRead>(input: R) -> Result<Vec<AlignmentSet>, AlignmentError> {
    input
        .lines()
        .enumerate()
        .map(|(i, line)| parse_line_at(line?.trim_end_matches('\r'), i + 1))
        .collect()
}

/// `max |src - tgt|` over all pairs; `None` for an empty set.
pub fn max_displacement(a: &AlignmentSet) -> Option<usize> {
    a.max_displacement_pair().map(|(_, d)| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_pairs() {
        let a = parse_pharaoh_line("0-0 1-2 2-1").unwrap();
        let pairs: Vec<_> = a.pairs().collect();
        assert_eq!(pairs, vec![(0, 0), (1, 2), (2, 1)]);
        assert!(parse_pharaoh_line("").unwrap().is_empty());
        assert_eq!(parse_pharaoh_line("1-1 1-1").unwrap().len(), 1);
    }

    #[test]
    fn bad_token_is_named() {
        let err = parse_pharaoh_line("0-0 3-x").unwrap_err();
        assert!(err.to_string().contains("\"3-x\""), "{err}");
        assert!(parse_pharaoh_line("-1-2").is_err());
        assert!(parse_pharaoh_line("12").is_err());
    }

    #[test]
    fn file_errors_carry_line_number() {
        let err = parse_pharaoh("0-0\n1-1 2-q\n".as_bytes()).unwrap_err();
        match err {
            AlignmentError::BadToken { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn displacement_examples() {
        let a: AlignmentSet = [(0, 0), (5, 5)].into_iter().collect();
        assert_eq!(max_displacement(&a), Some(0));
        let a: AlignmentSet = [(0, 11), (1, 5)].into_iter().collect();
        assert_eq!(max_displacement(&a), Some(11));
        assert_eq!(max_displacement(&AlignmentSet::new()), None);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        let a: AlignmentSet = [(9, 3), (1, 7), (0, 0)].into_iter().collect();
        assert_eq!(a.max_displacement_pair(), Some(((1, 7), 6)));
    }

    proptest! {
        #[test]
        fn displacement_ignores_order_and_duplicates(
            pairs in prop::collection::vec((0usize..40, 0usize..40), 0..30),
            seed in any::<u64>(),
        ) {
            let a: AlignmentSet = pairs.iter().copied().collect();
            let mut shuffled = pairs.clone();
            shuffled.extend(pairs.iter().copied());
            let k = shuffled.len().max(1);
            shuffled.rotate_left((seed as usize) % k);
            shuffled.reverse();
            let b: AlignmentSet = shuffled.into_iter().collect();
            prop_assert_eq!(max_displacement(&a), max_displacement(&b));
            let again = parse_pharaoh_line(&a.to_pharaoh()).unwrap();
            prop_assert_eq!(again, a);
        }

        #[test]
        fn identity_has_zero_displacement(n in 1usize..80) {
            let a: AlignmentSet = (0..n).map(|i| (i, i)).collect();
            prop_assert_eq!(max_displacement(&a), Some(0));
        }
    }
}
