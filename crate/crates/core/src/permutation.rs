//! Fixed token permutations and length filtering for locality-bias corpora.
//!
//! A [`Permutation`] is read as "output position `i` holds input token
//! `map[i]`".

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PermutationError {
    #[error("not a bijection on [0, {n}): {detail}")]
    NotBijection { n: usize, detail: String },
    #[error("sequence has {tokens} tokens but the permutation has length {n}")]
    LengthMismatch { tokens: usize, n: usize },
    #[error("invalid permutation entry {0:?}")]
    Parse(String),
}

/// The fixed 18-position permutation applied to source sentences.
const SIGMA_18: [usize; 18] = [11, 5, 9, 15, 8, 14, 10, 1, 3, 16, 12, 2, 0, 6, 17, 4, 13, 7];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self, PermutationError> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &m in &map {
            if m >= n {
                return Err(PermutationError::NotBijection {
                    n,
                    detail: format!("entry {m} out of range"),
                });
            }
            if std::mem::replace(&mut seen[m], true) {
                return Err(PermutationError::NotBijection {
                    n,
                    detail: format!("entry {m} repeated"),
                });
            }
        }
        Ok(Permutation { map })
    }

    pub fn identity(n: usize) -> Self {
        Permutation { map: (0..n).collect() }
    }

    /// The fixed permutation on 18 positions used for the permuted-source
    /// setting.
    pub fn sigma18() -> Self {
        Permutation { map: SIGMA_18.to_vec() }
    }

    pub fn reverse(n: usize) -> Self {
        Permutation {
            map: (0..n).rev().collect(),
        }
    }

    /// Uniform shuffle, deterministic in `seed`.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Permutation { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn invert(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Permutation { map: inv }
    }

    /// `out[i] = tokens[map[i]]`.
    pub fn apply<T: Clone>(&self, tokens: &[T]) -> Result<Vec<T>, PermutationError> {
        if tokens.len() != self.map.len() {
            return Err(PermutationError::LengthMismatch {
                tokens: tokens.len(),
                n: self.map.len(),
            });
        }
        Ok(self.map.iter().map(|&m| tokens[m].clone()).collect())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = PermutationError;

    /// Whitespace-separated 0-based entries.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let map = s
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| PermutationError::Parse(t.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Permutation::new(map)
    }
}

/// Source-length histogram and the line indices whose source has exactly
/// `length` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LengthFilter {
    pub kept: Vec<usize>,
    pub histogram: BTreeMap<usize, usize>,
}

impl LengthFilter {
    /// Most frequent length; ties go to the shorter length.
    pub fn most_common_length(&self) -> Option<usize> {
        self.histogram
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&len, _)| len)
    }
}

pub fn length_histogram<S: AsRef<str>>(sources: &[S]) -> BTreeMap<usize, usize> {
    let mut histogram = BTreeMap::new();
    for s in sources {
        *histogram.entry(s.as_ref().split_ascii_whitespace().count()).or_insert(0) += 1;
    }
    histogram
}

pub fn filter_by_length<S: AsRef<str>>(sources: &[S], length: usize) -> LengthFilter {
    let kept = sources
        .iter()
        .enumerate()
        .filter(|(_, s)| s.as_ref().split_ascii_whitespace().count() == length)
        .map(|(i, _)| i)
        .collect();
    LengthFilter {
        kept,
        histogram: length_histogram(sources),
    }
}

/// Seeded split of `n` items into (train, held-out) index lists, each in
/// ascending order.
pub fn holdout_split(n: usize, held_out: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let held_out = held_out.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test: Vec<usize> = rand::seq::index::sample(&mut rng, n, held_out).into_vec();
    test.sort_unstable();
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..n).filter(|&i| !is_test[i]).collect();
    (train, test)
}
