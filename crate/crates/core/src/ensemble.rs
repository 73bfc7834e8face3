//! One motif hierarchy per dictionary level, fused into a hard label and a
//! soft per-label stimulus vector.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{Dictionary, DictionaryError};
use crate::motif::{HierarchyParams, HierarchyResponse, MotifError, MotifHierarchy};
use crate::segmentation::InstanceGraph;

pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("no training instances for label `{0}`")]
    MissingLabel(String),
    #[error("instance label `{0}` is not declared")]
    UnknownLabel(String),
    #[error("need at least 2 stimulus vectors, got {0}")]
    TooFewSamples(usize),
    #[error("vertex {0} has no description")]
    MissingDescription(usize),
    #[error("ensemble directory is missing {0}")]
    MissingFile(String),
    #[error("ensemble is inconsistent: {0}")]
    Inconsistent(String),
    #[error("unsupported ensemble format version {0}")]
    Version(u32),
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
    #[error(transparent)]
    Motif(#[from] MotifError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Which per-hierarchy response feeds the exported stimulus vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusVariant {
    /// Mean over hierarchies of the label-normalized inter-level response.
    #[default]
    Literal,
    /// Mean over hierarchies of the level-averaged response before
    /// normalization over labels.
    Unnormalized,
}

impl fmt::Display for StimulusVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StimulusVariant::Literal => "literal",
            StimulusVariant::Unnormalized => "unnormalized",
        })
    }
}

impl FromStr for StimulusVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "literal" => Ok(StimulusVariant::Literal),
            "unnormalized" => Ok(StimulusVariant::Unnormalized),
            other => Err(format!("unknown stimulus variant `{other}` (expected literal or unnormalized)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub hierarchy: HierarchyParams,
    pub reject_threshold: f64,
    pub stimulus_variant: StimulusVariant,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        Self {
            hierarchy: HierarchyParams::default(),
            reject_threshold: 0.30,
            stimulus_variant: StimulusVariant::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    /// Winning label index, `None` when rejected.
    pub label: Option<usize>,
    /// Normalized ensemble score per label; all zero without activations.
    pub scores: Vec<f64>,
    /// Inter-level response of each hierarchy, per label.
    pub gammas: Vec<Vec<f64>>,
    pub confidence: f64,
}

impl ClassificationResult {
    pub fn is_rejected(&self) -> bool {
        self.label.is_none()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    labels: Vec<String>,
    hierarchies: usize,
    reject_threshold: f64,
    stimulus_variant: StimulusVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub labels: Vec<String>,
    pub dictionary: Dictionary,
    /// `hierarchies[i]` is bound to description level `i + 1`.
    pub hierarchies: Vec<MotifHierarchy>,
    pub reject_threshold: f64,
    pub stimulus_variant: StimulusVariant,
}

/// Copy of `graph` with every vertex assigned its level-`f` word.
pub fn annotate(graph: &InstanceGraph, dictionary: &Dictionary, f: u32) -> Result<InstanceGraph, EnsembleError> {
    let mut out = graph.clone();
    for i in 0..out.len() {
        let v = out.vertex_mut(i);
        let d = v.description.as_ref().ok_or(EnsembleError::MissingDescription(i))?;
        v.word = Some(dictionary.assign(d.bins(), f)?);
    }
    Ok(out)
}

/// Trains one hierarchy per dictionary level on the same instances.
pub fn train_ensemble(
    instances: &[(&InstanceGraph, &str)],
    labels: Vec<String>,
    dictionary: Dictionary,
    params: EnsembleParams,
) -> Result<Ensemble, EnsembleError> {
    for (_, label) in instances {
        if !labels.iter().any(|l| l == label) {
            return Err(EnsembleError::UnknownLabel(label.to_string()));
        }
    }
    if let Some(missing) = labels.iter().find(|l| !instances.iter().any(|(_, y)| y == l)) {
        return Err(EnsembleError::MissingLabel(missing.clone()));
    }
    let hierarchies = (1..=dictionary.n_levels)
        .into_par_iter()
        .map(|f| {
            let mut h = MotifHierarchy::new(f, labels.clone(), params.hierarchy)?;
            for (graph, label) in instances {
                h.train_instance(&annotate(graph, &dictionary, f)?, label)?;
            }
            Ok(h)
        })
        .collect::<Result<Vec<_>, EnsembleError>>()?;
    Ok(Ensemble {
        labels,
        dictionary,
        hierarchies,
        reject_threshold: params.reject_threshold,
        stimulus_variant: params.stimulus_variant,
    })
}

/// Fuses per-hierarchy responses: scores are the label-normalized sums of
/// `gammas`; the argmax wins (ties to the lower index) unless every score is
/// zero or the winning score is below `reject_threshold`.
pub fn decide(gammas: Vec<Vec<f64>>, n_labels: usize, reject_threshold: f64) -> ClassificationResult {
    let mut scores = vec![0.0; n_labels];
    for g in &gammas {
        for (s, x) in scores.iter_mut().zip(g) {
            *s += x;
        }
    }
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return ClassificationResult {
            label: None,
            scores: vec![0.0; n_labels],
            gammas,
            confidence: 0.0,
        };
    }
    scores.iter_mut().for_each(|s| *s /= total);
    let (best, confidence) = argmax(&scores);
    ClassificationResult {
        label: (confidence >= reject_threshold).then_some(best),
        scores,
        gammas,
        confidence,
    }
}

fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Mean of the per-hierarchy vectors, per label.
pub fn stimuli_from(per_hierarchy: &[Vec<f64>], n_labels: usize) -> Vec<f64> {
    let mut r = vec![0.0; n_labels];
    for g in per_hierarchy {
        for (a, x) in r.iter_mut().zip(g) {
            *a += x;
        }
    }
    let n = per_hierarchy.len().max(1) as f64;
    r.into_iter().map(|x| x / n).collect()
}

impl Ensemble {
    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    /// Response of every hierarchy to a described (word-free) graph.
    pub fn responses(&self, graph: &InstanceGraph) -> Result<Vec<HierarchyResponse>, EnsembleError> {
        self.hierarchies
            .par_iter()
            .map(|h| Ok(h.respond(&annotate(graph, &self.dictionary, h.description_level)?)?))
            .collect()
    }

    pub fn classify(&self, graph: &InstanceGraph) -> Result<ClassificationResult, EnsembleError> {
        Ok(self.classify_responses(&self.responses(graph)?))
    }

    pub fn classify_responses(&self, responses: &[HierarchyResponse]) -> ClassificationResult {
        decide(
            responses.iter().map(|r| r.gamma.clone()).collect(),
            self.n_labels(),
            self.reject_threshold,
        )
    }

    pub fn stimuli(&self, graph: &InstanceGraph) -> Result<Vec<f64>, EnsembleError> {
        Ok(self.stimuli_responses(&self.responses(graph)?))
    }

    pub fn stimuli_responses(&self, responses: &[HierarchyResponse]) -> Vec<f64> {
        let per: Vec<Vec<f64>> = responses
            .iter()
            .map(|r| match self.stimulus_variant {
                StimulusVariant::Literal => r.gamma.clone(),
                StimulusVariant::Unnormalized => r.accumulated.clone(),
            })
            .collect();
        stimuli_from(&per, self.n_labels())
    }

    /// Writes `manifest.json`, `dictionary.json` and `hierarchy_<i>.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), EnsembleError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            format_version: ENSEMBLE_FORMAT_VERSION,
            labels: self.labels.clone(),
            hierarchies: self.hierarchies.len(),
            reject_threshold: self.reject_threshold,
            stimulus_variant: self.stimulus_variant,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        self.dictionary.save(dir.join("dictionary.json"))?;
        for h in &self.hierarchies {
            h.save(dir.join(format!("hierarchy_{}.json", h.description_level)))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, EnsembleError> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<String, EnsembleError> {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(EnsembleError::MissingFile(name.to_string()));
            }
            Ok(fs::read_to_string(path)?)
        };
        let manifest: Manifest = serde_json::from_str(&read("manifest.json")?)?;
        if manifest.format_version != ENSEMBLE_FORMAT_VERSION {
            return Err(EnsembleError::Version(manifest.format_version));
        }
        let dictionary = Dictionary::from_json(&read("dictionary.json")?)?;
        if manifest.hierarchies != dictionary.n_levels as usize {
            return Err(EnsembleError::Inconsistent(format!(
                "{} hierarchies for a {}-level dictionary",
                manifest.hierarchies, dictionary.n_levels
            )));
        }
        let mut hierarchies = Vec::with_capacity(manifest.hierarchies);
        for f in 1..=manifest.hierarchies {
            let h = MotifHierarchy::from_json(&read(&format!("hierarchy_{f}.json"))?)?;
            if h.labels != manifest.labels || h.description_level as usize != f {
                return Err(EnsembleError::Inconsistent(format!("hierarchy_{f}.json does not match the manifest")));
            }
            hierarchies.push(h);
        }
        Ok(Self {
            labels: manifest.labels,
            dictionary,
            hierarchies,
            reject_threshold: manifest.reject_threshold,
            stimulus_variant: manifest.stimulus_variant,
        })
    }
}

/// Label-pair statistics of Manhattan distances between stimulus vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistances {
    /// Mean distance per label pair, divided by the largest mean.
    pub mean: Vec<Vec<f64>>,
    /// Population standard deviation, on the same scale as `mean`.
    pub std: Vec<Vec<f64>>,
    /// Number of vector pairs behind each entry.
    pub pairs: Vec<Vec<usize>>,
    /// Largest unscaled mean.
    pub scale: f64,
}

/// Mean and deviation of Manhattan distances over all cross-label pairs,
/// and over distinct within-label pairs on the diagonal. Entries without
/// pairs are 0.
pub fn inter_category_distances(samples: &[(usize, Vec<f64>)], n_labels: usize) -> Result<CategoryDistances, EnsembleError> {
    if samples.len() < 2 {
        return Err(EnsembleError::TooFewSamples(samples.len()));
    }
    let mut sum = vec![vec![0.0; n_labels]; n_labels];
    let mut sum_sq = vec![vec![0.0; n_labels]; n_labels];
    let mut pairs = vec![vec![0usize; n_labels]; n_labels];
    for (i, (a, va)) in samples.iter().enumerate() {
        for (b, vb) in &samples[i + 1..] {
            let d: f64 = va.iter().zip(vb).map(|(x, y)| (x - y).abs()).sum();
            let (p, q) = (*a.min(b), *a.max(b));
            sum[p][q] += d;
            sum_sq[p][q] += d * d;
            pairs[p][q] += 1;
        }
    }
    let mut mean = vec![vec![0.0; n_labels]; n_labels];
    let mut std = vec![vec![0.0; n_labels]; n_labels];
    for p in 0..n_labels {
        for q in p..n_labels {
            let n = pairs[p][q];
            if n > 0 {
                let m = sum[p][q] / n as f64;
                let var = (sum_sq[p][q] / n as f64 - m * m).max(0.0);
                mean[p][q] = m;
                std[p][q] = var.sqrt();
            }
            mean[q][p] = mean[p][q];
            std[q][p] = std[p][q];
            pairs[q][p] = pairs[p][q];
        }
    }
    let scale = mean.iter().flatten().copied().fold(0.0, f64::max);
    if scale > 0.0 {
        for row in mean.iter_mut().chain(std.iter_mut()) {
            row.iter_mut().for_each(|x| *x /= scale);
        }
    }
    Ok(CategoryDistances { mean, std, pairs, scale })
}
