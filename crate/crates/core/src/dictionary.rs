//! Coarse-to-fine visual-word dictionary built by divisive 2-means.
//!
//! Level `f` holds at most `2^f` words. A word at level `f` with tree index
//! `i` has children `2i` and `2i + 1` at level `f + 1`. Clusters that cannot
//! be split (fewer than two members, or all members identical) stop early, so
//! deeper levels may hold fewer words and sparse indices.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DICTIONARY_FORMAT_VERSION: u32 = 1;

const MAX_LLOYD_ITERATIONS: usize = 100;
const RELATIVE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("need at least 2 descriptions to train a dictionary, got {0}")]
    TooFewDescriptions(usize),
    #[error("dictionary needs at least one level")]
    NoLevels,
    #[error("descriptions have inconsistent lengths")]
    DimensionMismatch,
    #[error("level {level} is outside 1..={n_levels}")]
    LevelOutOfRange { level: u32, n_levels: u32 },
    #[error("level {0} holds no words")]
    EmptyLevel(u32),
    #[error("unsupported dictionary format version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A word at description level `level >= 1` with tree index `< 2^level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WordId {
    pub level: u32,
    pub index: u32,
}

impl WordId {
    pub fn new(level: u32, index: u32) -> Self {
        debug_assert!(level >= 1 && (index as u64) < (1u64 << level));
        Self { level, index }
    }
}

impl fmt::Display for WordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}.{}", self.level, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub id: WordId,
    pub centroid: Vec<f64>,
    /// Tree index of the parent at `level - 1`; `None` at level 1.
    pub parent: Option<u32>,
    /// Number of training descriptions in the cluster.
    pub members: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DictionaryParams {
    pub n_levels: u32,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    pub format_version: u32,
    pub n_levels: u32,
    pub dimension: usize,
    /// `levels[f - 1]` holds the words of level `f`, sorted by index.
    pub levels: Vec<Vec<Word>>,
}

impl Dictionary {
    pub fn train<D: AsRef<[f64]>>(descriptions: &[D], params: DictionaryParams) -> Result<Self, DictionaryError> {
        train_dictionary(descriptions, params)
    }

    /// Words of level `f` (1-based).
    pub fn level(&self, f: u32) -> Result<&[Word], DictionaryError> {
        if f == 0 || f > self.n_levels {
            return Err(DictionaryError::LevelOutOfRange {
                level: f,
                n_levels: self.n_levels,
            });
        }
        Ok(&self.levels[f as usize - 1])
    }

    /// Nearest level-`f` word by Euclidean distance; ties go to the lower index.
    pub fn assign(&self, description: &[f64], f: u32) -> Result<WordId, DictionaryError> {
        let words = self.level(f)?;
        if description.len() != self.dimension {
            return Err(DictionaryError::DimensionMismatch);
        }
        let mut best: Option<(f64, WordId)> = None;
        for w in words {
            let d = squared_distance(description, &w.centroid);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, w.id));
            }
        }
        best.map(|(_, id)| id).ok_or(DictionaryError::EmptyLevel(f))
    }

    pub fn word_counts(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn to_json(&self) -> Result<String, DictionaryError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, DictionaryError> {
        let dict: Self = serde_json::from_str(text)?;
        if dict.format_version != DICTIONARY_FORMAT_VERSION {
            return Err(DictionaryError::Version(dict.format_version));
        }
        Ok(dict)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DictionaryError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DictionaryError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Alias of [`Dictionary::assign`].
pub fn assign_word(description: &[f64], f: u32, dict: &Dictionary) -> Result<WordId, DictionaryError> {
    dict.assign(description, f)
}

/// Builds the dictionary top-down with recursive 2-means splits.
pub fn train_dictionary<D: AsRef<[f64]>>(
    descriptions: &[D],
    params: DictionaryParams,
) -> Result<Dictionary, DictionaryError> {
    if params.n_levels == 0 {
        return Err(DictionaryError::NoLevels);
    }
    if descriptions.len() < 2 {
        return Err(DictionaryError::TooFewDescriptions(descriptions.len()));
    }
    let data: Vec<&[f64]> = descriptions.iter().map(AsRef::as_ref).collect();
    let dimension = data[0].len();
    if data.iter().any(|d| d.len() != dimension) {
        return Err(DictionaryError::DimensionMismatch);
    }

    // (tree index, member rows) of the clusters at the previous level.
    let mut frontier: Vec<(u32, Vec<usize>)> = vec![(0, (0..data.len()).collect())];
    let mut levels = Vec::with_capacity(params.n_levels as usize);
    for f in 1..=params.n_levels {
        let mut words = Vec::new();
        let mut next = Vec::new();
        for (parent, members) in &frontier {
            let children: Vec<Vec<usize>> = if splittable(&data, members) {
                let mut rng = ChaCha8Rng::seed_from_u64(node_seed(params.seed, f, *parent));
                two_means(&data, members, params.kmeans_restarts.max(1), &mut rng)
                    .map(|(a, b)| vec![a, b])
                    .unwrap_or_default()
            } else if f == 1 {
                // An unsplittable root still yields one level-1 word.
                vec![members.clone()]
            } else {
                Vec::new()
            };
            for (c, child) in children.into_iter().enumerate() {
                let index = 2 * parent + c as u32;
                words.push(Word {
                    id: WordId::new(f, index),
                    centroid: mean(&data, &child, dimension),
                    parent: (f > 1).then_some(*parent),
                    members: child.len(),
                });
                next.push((index, child));
            }
        }
        levels.push(words);
        frontier = next;
    }
    Ok(Dictionary {
        format_version: DICTIONARY_FORMAT_VERSION,
        n_levels: params.n_levels,
        dimension,
        levels,
    })
}

fn node_seed(seed: u64, level: u32, index: u32) -> u64 {
    seed ^ ((level as u64) << 40) ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn splittable(data: &[&[f64]], members: &[usize]) -> bool {
    members.len() >= 2 && members.iter().any(|&i| data[i] != data[members[0]])
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean(data: &[&[f64]], members: &[usize], dimension: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dimension];
    for &i in members {
        for (a, x) in acc.iter_mut().zip(data[i]) {
            *a += x;
        }
    }
    let n = members.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Best of `restarts` Lloyd runs with farthest-point initialization.
/// Returns `None` if no run produced two non-empty clusters.
fn two_means(
    data: &[&[f64]],
    members: &[usize],
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let dimension = data[0].len();
    let mut best: Option<(f64, Vec<bool>)> = None;
    for _ in 0..restarts {
        let first = members[rng.random_range(0..members.len())];
        let mut second = first;
        let mut far = -1.0;
        for &i in members {
            let d = squared_distance(data[i], data[first]);
            if d > far {
                far = d;
                second = i;
            }
        }
        let mut centers = [data[first].to_vec(), data[second].to_vec()];
        let mut assignment = vec![false; members.len()];
        let mut inertia = f64::INFINITY;
        for _ in 0..MAX_LLOYD_ITERATIONS {
            let mut next = Vec::with_capacity(members.len());
            let mut total = 0.0;
            for &i in members {
                let (d0, d1) = (
                    squared_distance(data[i], &centers[0]),
                    squared_distance(data[i], &centers[1]),
                );
                next.push(d1 < d0);
                total += d0.min(d1);
            }
            let ones = next.iter().filter(|&&b| b).count();
            if ones == 0 || ones == members.len() {
                break;
            }
            assignment = next;
            let previous = inertia;
            inertia = total;
            let groups = split_members(members, &assignment);
            centers = [mean(data, &groups.0, dimension), mean(data, &groups.1, dimension)];
            if previous.is_finite() && (previous - inertia).abs() <= RELATIVE_TOLERANCE * previous {
                break;
            }
        }
        if !inertia.is_finite() {
            continue;
        }
        // Inertia of the final centers for a fair comparison across restarts.
        let groups = split_members(members, &assignment);
        let score: f64 = groups
            .0
            .iter()
            .map(|&i| squared_distance(data[i], &centers[0]))
            .chain(groups.1.iter().map(|&i| squared_distance(data[i], &centers[1])))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, assignment));
        }
    }
    best.map(|(_, assignment)| split_members(members, &assignment))
}

fn split_members(members: &[usize], assignment: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (&i, &second) in members.iter().zip(assignment) {
        if second {
            b.push(i);
        } else {
            a.push(i);
        }
    }
    (a, b)
}
