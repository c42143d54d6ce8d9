use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::NormalizedImage;

use super::pair::{canonical_pair, score_prepared, PairScore, PreparedImage, ScoreOptions};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScoringError {
    #[error("at least 2 images are needed, got {0}")]
    DatasetTooSmall(usize),
    #[error("image name {0:?} appears more than once")]
    DuplicateName(String),
    #[error("expected {expected} pair scores, got {actual}")]
    WrongPairCount { expected: usize, actual: usize },
    #[error("pair ({0}, {1}) is missing or unknown")]
    UnknownPair(String, String),
    #[error("pair ({0}, {1}) appears more than once")]
    DuplicatePair(String, String),
    #[error("distance {0} is outside [0, 1]")]
    DistanceOutOfRange(f64),
}

/// `N(N-1)/2`, the number of unordered pairs among `n` coins.
pub const fn potential_links(n: usize) -> usize {
    if n < 2 {
        0
    } else {
        n * (n - 1) / 2
    }
}

/// Every unordered pair of a dataset, exactly once.
///
/// `coin_names` is sorted; `scores` lists pairs `(i, j)`, `i < j`, in row-major
/// order of that sorted list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct DistanceMatrix {
    coin_names: Vec<String>,
    scores: Vec<PairScore>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    coin_names: Vec<String>,
    scores: Vec<PairScore>,
}

impl TryFrom<RawMatrix> for DistanceMatrix {
    type Error = ScoringError;
    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        DistanceMatrix::new(raw.coin_names, raw.scores)
    }
}

impl From<DistanceMatrix> for RawMatrix {
    fn from(m: DistanceMatrix) -> Self {
        RawMatrix {
            coin_names: m.coin_names,
            scores: m.scores,
        }
    }
}

impl DistanceMatrix {
    /// Validates completeness and canonicalizes ordering. Scores may be given
    /// in any order and with names in either orientation.
    pub fn new(coin_names: Vec<String>, scores: Vec<PairScore>) -> Result<Self, ScoringError> {
        let mut names = coin_names;
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(ScoringError::DuplicateName(w[0].clone()));
        }
        let n = names.len();
        let expected = potential_links(n);
        if scores.len() != expected {
            return Err(ScoringError::WrongPairCount {
                expected,
                actual: scores.len(),
            });
        }
        let index: HashMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let mut slots: Vec<Option<PairScore>> = vec![None; expected];
        for mut s in scores {
            if !(0.0..=1.0).contains(&s.distance) {
                return Err(ScoringError::DistanceOutOfRange(s.distance));
            }
            if s.name1 > s.name2 {
                std::mem::swap(&mut s.name1, &mut s.name2);
                s.transform = s.transform.map(|t| t.inverse());
            }
            let (Some(&i), Some(&j)) = (index.get(&s.name1), index.get(&s.name2)) else {
                return Err(ScoringError::UnknownPair(s.name1, s.name2));
            };
            if i == j {
                return Err(ScoringError::UnknownPair(s.name1, s.name2));
            }
            let k = pair_index(n, i, j);
            if slots[k].is_some() {
                return Err(ScoringError::DuplicatePair(s.name1, s.name2));
            }
            slots[k] = Some(s);
        }
        Ok(Self {
            coin_names: names,
            scores: slots.into_iter().map(|s| s.expect("all slots filled")).collect(),
            index,
        })
    }

    pub fn coin_names(&self) -> &[String] {
        &self.coin_names
    }

    pub fn scores(&self) -> &[PairScore] {
        &self.scores
    }

    pub fn n_coins(&self) -> usize {
        self.coin_names.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.scores.len()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, a: &str, b: &str) -> Option<&PairScore> {
        let (n1, n2) = canonical_pair(a, b);
        let i = self.position(n1)?;
        let j = self.position(n2)?;
        (i != j).then(|| &self.scores[pair_index(self.n_coins(), i, j)])
    }

    /// Distance between coins `i` and `j` (by position); 0 on the diagonal.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.scores[pair_index(self.n_coins(), i, j)].distance,
            std::cmp::Ordering::Greater => self.scores[pair_index(self.n_coins(), j, i)].distance,
        }
    }
}

/// Row-major index of `(i, j)`, `i < j`, in the strict upper triangle.
fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Scores every pair of `images`.
pub fn score_dataset(
    images: &[NormalizedImage],
    opts: &ScoreOptions,
) -> Result<DistanceMatrix, ScoringError> {
    score_dataset_with_progress(images, opts, |_| {})
}

/// Like [`score_dataset`], calling `progress` once per finished pair (from
/// worker threads, in no particular order). Runs on the current rayon pool.
pub fn score_dataset_with_progress(
    images: &[NormalizedImage],
    opts: &ScoreOptions,
    progress: impl Fn(usize) + Sync,
) -> Result<DistanceMatrix, ScoringError> {
    if images.len() < 2 {
        return Err(ScoringError::DatasetTooSmall(images.len()));
    }
    let mut seen = BTreeSet::new();
    for img in images {
        if !seen.insert(img.source_name.as_str()) {
            return Err(ScoringError::DuplicateName(img.source_name.clone()));
        }
    }
    let mut prepared: Vec<PreparedImage> = images
        .par_iter()
        .map(|img| PreparedImage::new(img.clone(), &opts.detector))
        .collect();
    prepared.sort_by(|a, b| a.name().cmp(b.name()));

    let n = prepared.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let scores: Vec<PairScore> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let s = score_prepared(&prepared[i], &prepared[j], opts);
            progress(done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1);
            s
        })
        .collect();
    let names = prepared.iter().map(|p| p.name().to_owned()).collect();
    DistanceMatrix::new(names, scores)
}
