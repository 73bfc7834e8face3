use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hierarchy::union_description;
use super::{check_word, matched_vertex_sets, Aggregation, MotifError, MotifHierarchy, WordMotif};
use crate::descriptor::DescriptionVector;
use crate::segmentation::InstanceGraph;

/// Segments (by id) covered by one match and their merged description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedSet {
    pub segments: Vec<usize>,
    pub description: DescriptionVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    /// Vertex index within its level.
    pub vertex: usize,
    /// Distinct matches in lexicographic order of graph vertex indices.
    pub matches: Vec<MatchedSet>,
    /// Stimulus per label index.
    pub alpha: Vec<f64>,
}

/// Activated vertices per motif level for one query.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationTrace {
    pub levels: Vec<Vec<Activation>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyResponse {
    /// Intra-level response per motif level and label.
    pub beta: Vec<Vec<f64>>,
    /// Inter-level response per label; all zero without activations.
    pub gamma: Vec<f64>,
    /// Level-averaged `beta * P(y | l)` before normalization over labels.
    pub accumulated: Vec<f64>,
    pub trace: PropagationTrace,
}

impl HierarchyResponse {
    pub fn is_active(&self) -> bool {
        self.gamma.iter().any(|&g| g > 0.0)
    }
}

/// Mean Gaussian kernel of the Jensen-Shannon divergence between `q` and
/// each prototype; 0 without prototypes.
pub fn stimulus(prototypes: &[DescriptionVector], q: &DescriptionVector, sigma: f64) -> f64 {
    if prototypes.is_empty() {
        return 0.0;
    }
    let denom = 2.0 * sigma * sigma;
    let total: f64 = prototypes
        .iter()
        .map(|p| {
            let j = p.js(q);
            (-j * j / denom).exp()
        })
        .sum();
    total / prototypes.len() as f64
}

/// Intra-level response from per-vertex stimuli `alphas[i][y]` and vertex
/// conditionals `p_y_v[i][y]`, normalized over labels.
pub fn beta_from(alphas: &[Vec<f64>], p_y_v: &[Vec<f64>], n_labels: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_labels];
    for (a, p) in alphas.iter().zip(p_y_v) {
        for y in 0..n_labels {
            out[y] += a[y] * p[y];
        }
    }
    normalize(out)
}

/// Inter-level response from `betas[l][y]` weighted by `p_y_l[l][y]`,
/// normalized over labels.
pub fn gamma_from(betas: &[Vec<f64>], p_y_l: &[Vec<f64>], n_labels: usize) -> Vec<f64> {
    normalize(weighted_levels(betas, p_y_l, n_labels))
}

fn weighted_levels(betas: &[Vec<f64>], p_y_l: &[Vec<f64>], n_labels: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_labels];
    for (b, p) in betas.iter().zip(p_y_l) {
        for y in 0..n_labels {
            out[y] += b[y] * p[y];
        }
    }
    out
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    v
}

impl MotifHierarchy {
    /// Activations of one query graph (words at this hierarchy's level)
    /// and the resulting responses.
    pub fn respond(&self, graph: &InstanceGraph) -> Result<HierarchyResponse, MotifError> {
        for i in 0..graph.len() {
            check_word(i, graph.vertex(i).word, self.description_level)?;
            if graph.vertex(i).description.is_none() {
                return Err(MotifError::MissingDescription(i));
            }
        }
        let n_labels = self.labels.len();
        let object = WordMotif::from_instance(graph)?;
        let (p_y_v, p_y_l) = self.conditionals();
        let mut trace = PropagationTrace::default();
        let mut beta = Vec::with_capacity(self.levels.len());
        for (l, level) in self.levels.iter().enumerate() {
            // A level-l motif contains a level-(l-1) motif, so once a level
            // stays silent every deeper level does too.
            if l > 0 && trace.levels[l - 1].is_empty() {
                trace.levels.push(Vec::new());
                beta.push(vec![0.0; n_labels]);
                continue;
            }
            let activations: Vec<Activation> = level
                .vertices
                .par_iter()
                .enumerate()
                .filter_map(|(v, vertex)| self.activate(v, vertex, &object, graph))
                .collect();
            let alphas: Vec<Vec<f64>> = activations.iter().map(|a| a.alpha.clone()).collect();
            let conds: Vec<Vec<f64>> = activations.iter().map(|a| p_y_v[l][a.vertex].clone()).collect();
            beta.push(beta_from(&alphas, &conds, n_labels));
            trace.levels.push(activations);
        }
        let gamma = gamma_from(&beta, &p_y_l, n_labels);
        let levels = self.levels.len().max(1) as f64;
        let accumulated = weighted_levels(&beta, &p_y_l, n_labels)
            .into_iter()
            .map(|x| x / levels)
            .collect();
        Ok(HierarchyResponse {
            beta,
            gamma,
            accumulated,
            trace,
        })
    }

    fn activate(
        &self,
        v: usize,
        vertex: &super::MotifVertex,
        object: &WordMotif,
        graph: &InstanceGraph,
    ) -> Option<Activation> {
        let sets = matched_vertex_sets(&vertex.motif, object, self.params.max_embeddings);
        if sets.is_empty() {
            return None;
        }
        let matches: Vec<MatchedSet> = sets
            .iter()
            .map(|s| MatchedSet {
                segments: s.iter().map(|&i| graph.vertex(i).segment.id).collect(),
                description: union_description(graph, s),
            })
            .collect();
        let sigma = self.params.sigma;
        let alpha = vertex
            .prototypes
            .iter()
            .map(|protos| {
                let mut values = matches.iter().map(|m| stimulus(protos, &m.description, sigma));
                match self.params.aggregation {
                    Aggregation::First => values.next().unwrap_or(0.0),
                    Aggregation::Max => values.fold(0.0, f64::max),
                    Aggregation::Mean => values.sum::<f64>() / matches.len() as f64,
                }
            })
            .collect();
        Some(Activation {
            vertex: v,
            matches,
            alpha,
        })
    }
}
