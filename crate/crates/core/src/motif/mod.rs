//! Shape motif hierarchies: word motifs, their matching into object graphs,
//! bottom-up training and the stimulus/response computation used at
//! inference time.

mod hierarchy;
mod inference;
mod matching;
mod word_motif;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::WordId;

pub use hierarchy::{MotifHierarchy, MotifLevel, MotifVertex, HIERARCHY_FORMAT_VERSION};
pub use inference::{beta_from, gamma_from, stimulus, Activation, HierarchyResponse, MatchedSet, PropagationTrace};
pub use matching::{for_each_embedding, match_activation, matched_vertex_sets};
pub use word_motif::{MotifKey, WordMotif};

#[derive(Debug, Error)]
pub enum MotifError {
    #[error("instance has an empty label")]
    UnlabeledInstance,
    #[error("label `{0}` is not declared")]
    UnknownLabel(String),
    #[error("vertex {0} has no word")]
    MissingWord(usize),
    #[error("vertex {0} has no description")]
    MissingDescription(usize),
    #[error("vertex {vertex} carries a level-{found} word, hierarchy expects level {expected}")]
    WordLevelMismatch { vertex: usize, expected: u32, found: u32 },
    #[error("invalid motif: {0}")]
    InvalidMotif(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("unsupported hierarchy format version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// How stimuli from several matches of one motif in one object combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Best-scoring match per label.
    #[default]
    Max,
    /// First match in lexicographic segment order.
    First,
    /// Mean over all distinct matches.
    Mean,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Max => "max",
            Aggregation::First => "first",
            Aggregation::Mean => "mean",
        })
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "max" => Ok(Aggregation::Max),
            "first" => Ok(Aggregation::First),
            "mean" => Ok(Aggregation::Mean),
            other => Err(format!("unknown aggregation `{other}` (expected max, first or mean)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyParams {
    /// Kernel bandwidth on the Jensen-Shannon divergence.
    pub sigma: f64,
    pub aggregation: Aggregation,
    /// Reservoir size per vertex and label; 0 keeps every prototype.
    pub max_prototypes_per_vertex_per_label: usize,
    /// Cap on segment sets propagated per level of one instance.
    pub max_propagation_nodes: usize,
    /// Cap on embeddings enumerated per motif and query.
    pub max_embeddings: usize,
    pub seed: u64,
}

impl Default for HierarchyParams {
    fn default() -> Self {
        Self {
            sigma: 0.025,
            aggregation: Aggregation::Max,
            max_prototypes_per_vertex_per_label: 0,
            max_propagation_nodes: 4096,
            max_embeddings: 100_000,
            seed: 0,
        }
    }
}

impl HierarchyParams {
    pub fn validate(&self) -> Result<(), MotifError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(MotifError::InvalidParams(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.max_propagation_nodes == 0 || self.max_embeddings == 0 {
            return Err(MotifError::InvalidParams("node and embedding caps must be positive".into()));
        }
        Ok(())
    }
}

fn check_word(vertex: usize, word: Option<WordId>, level: u32) -> Result<WordId, MotifError> {
    let word = word.ok_or(MotifError::MissingWord(vertex))?;
    if word.level != level {
        return Err(MotifError::WordLevelMismatch {
            vertex,
            expected: level,
            found: word.level,
        });
    }
    Ok(word)
}
