use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_word, HierarchyParams, MotifError, MotifKey, WordMotif};
use crate::descriptor::DescriptionVector;
use crate::segmentation::InstanceGraph;

pub const HIERARCHY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifVertex {
    pub motif: WordMotif,
    /// Stored descriptions per label index.
    pub prototypes: Vec<Vec<DescriptionVector>>,
    /// Observations per label index; equals the prototype count unless the
    /// reservoir cap is active.
    pub counts: Vec<u64>,
}

impl MotifVertex {
    fn new(motif: WordMotif, labels: usize) -> Self {
        Self {
            motif,
            prototypes: vec![Vec::new(); labels],
            counts: vec![0; labels],
        }
    }

    /// P(y | v) from the observation counts.
    pub fn conditional(&self) -> Vec<f64> {
        normalized(&self.counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifLevel {
    pub vertices: Vec<MotifVertex>,
    /// Undirected edges as `(low, high)` vertex indices.
    pub edges: BTreeSet<(usize, usize)>,
    /// Sum of vertex counts per label.
    pub label_counts: Vec<u64>,
}

impl MotifLevel {
    fn new(labels: usize) -> Self {
        Self {
            vertices: Vec::new(),
            edges: BTreeSet::new(),
            label_counts: vec![0; labels],
        }
    }

    /// P(y | l) from the level's label counts.
    pub fn conditional(&self) -> Vec<f64> {
        normalized(&self.label_counts)
    }
}

fn normalized(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// One hierarchy of unique word motifs, bound to a single description level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotifHierarchy {
    pub format_version: u32,
    pub description_level: u32,
    pub labels: Vec<String>,
    pub params: HierarchyParams,
    pub levels: Vec<MotifLevel>,
    #[serde(skip)]
    lookup: Vec<HashMap<MotifKey, Vec<usize>>>,
}

impl PartialEq for MotifHierarchy {
    fn eq(&self, other: &Self) -> bool {
        self.format_version == other.format_version
            && self.description_level == other.description_level
            && self.labels == other.labels
            && self.params == other.params
            && self.levels == other.levels
    }
}

impl MotifHierarchy {
    pub fn new(description_level: u32, labels: Vec<String>, params: HierarchyParams) -> Result<Self, MotifError> {
        params.validate()?;
        if labels.iter().any(String::is_empty) {
            return Err(MotifError::UnlabeledInstance);
        }
        Ok(Self {
            format_version: HIERARCHY_FORMAT_VERSION,
            description_level,
            labels,
            params,
            levels: Vec::new(),
            lookup: Vec::new(),
        })
    }

    pub fn label_index(&self, label: &str) -> Result<usize, MotifError> {
        if label.is_empty() {
            return Err(MotifError::UnlabeledInstance);
        }
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| MotifError::UnknownLabel(label.to_string()))
    }

    /// `(vertices, edges)` per motif level.
    pub fn level_sizes(&self) -> Vec<(usize, usize)> {
        self.levels.iter().map(|l| (l.vertices.len(), l.edges.len())).collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.levels.iter().map(|l| l.vertices.len()).sum()
    }

    /// P(y | v) for every vertex of every level, and P(y | l) per level.
    pub fn conditionals(&self) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
        let per_vertex = self
            .levels
            .iter()
            .map(|l| l.vertices.iter().map(MotifVertex::conditional).collect())
            .collect();
        let per_level = self.levels.iter().map(MotifLevel::conditional).collect();
        (per_vertex, per_level)
    }

    pub fn train<'a>(
        &mut self,
        instances: impl IntoIterator<Item = (&'a InstanceGraph, &'a str)>,
    ) -> Result<(), MotifError> {
        for (graph, label) in instances {
            self.train_instance(graph, label)?;
        }
        Ok(())
    }

    /// Propagates one labeled instance bottom-up through the motif levels.
    ///
    /// Level 1 holds the single segments. Each level's instance edges join
    /// segment sets that share a segment (or, on level 1, adjacent segments);
    /// their unions form the next level. Every set is recorded under the
    /// unique motif vertex isomorphic to the subgraph it induces.
    pub fn train_instance(&mut self, graph: &InstanceGraph, label: &str) -> Result<(), MotifError> {
        let y = self.label_index(label)?;
        let object = WordMotif::from_instance(graph)?;
        for i in 0..graph.len() {
            check_word(i, graph.vertex(i).word, self.description_level)?;
            if graph.vertex(i).description.is_none() {
                return Err(MotifError::MissingDescription(i));
            }
        }
        if self.lookup.len() != self.levels.len() {
            self.rebuild_lookup();
        }

        let mut nodes: Vec<Vec<usize>> = (0..graph.len()).map(|i| vec![i]).collect();
        let mut edges: Vec<(usize, usize)> = graph.edges().collect();
        let mut level = 0;
        while !nodes.is_empty() {
            if self.levels.len() == level {
                self.levels.push(MotifLevel::new(self.labels.len()));
                self.lookup.push(HashMap::new());
            }
            let mut vertex_of = Vec::with_capacity(nodes.len());
            for node in &nodes {
                let motif = WordMotif::induced(&object, node);
                let v = self.find_or_insert(level, motif);
                let description = union_description(graph, node);
                self.record(level, v, y, description);
                vertex_of.push(v);
            }
            for &(a, b) in &edges {
                let (va, vb) = (vertex_of[a], vertex_of[b]);
                if va != vb {
                    self.levels[level].edges.insert((va.min(vb), va.max(vb)));
                }
            }
            if edges.is_empty() {
                break;
            }
            (nodes, edges) = propagate(&nodes, &edges, self.params.max_propagation_nodes);
            level += 1;
        }
        Ok(())
    }

    fn rebuild_lookup(&mut self) {
        self.lookup = self
            .levels
            .iter()
            .map(|level| {
                let mut map: HashMap<MotifKey, Vec<usize>> = HashMap::new();
                for (i, v) in level.vertices.iter().enumerate() {
                    map.entry(v.motif.key()).or_default().push(i);
                }
                map
            })
            .collect();
    }

    fn find_or_insert(&mut self, level: usize, motif: WordMotif) -> usize {
        let key = motif.key();
        let vertices = &mut self.levels[level].vertices;
        let bucket = self.lookup[level].entry(key).or_default();
        if let Some(&v) = bucket.iter().find(|&&v| vertices[v].motif.is_isomorphic(&motif)) {
            return v;
        }
        vertices.push(MotifVertex::new(motif, self.labels.len()));
        let v = vertices.len() - 1;
        bucket.push(v);
        v
    }

    fn record(&mut self, level: usize, v: usize, y: usize, description: DescriptionVector) {
        let cap = self.params.max_prototypes_per_vertex_per_label;
        let seed = self.params.seed;
        let lvl = &mut self.levels[level];
        lvl.label_counts[y] += 1;
        let vertex = &mut lvl.vertices[v];
        vertex.counts[y] += 1;
        let seen = vertex.counts[y];
        let stored = &mut vertex.prototypes[y];
        if cap == 0 || stored.len() < cap {
            stored.push(description);
        } else {
            let slot = mix(seed, level as u64, v as u64, y as u64, seen) % seen;
            if (slot as usize) < cap {
                stored[slot as usize] = description;
            }
        }
    }

    pub fn to_json(&self) -> Result<String, MotifError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, MotifError> {
        let mut h: Self = serde_json::from_str(text)?;
        if h.format_version != HIERARCHY_FORMAT_VERSION {
            return Err(MotifError::Version(h.format_version));
        }
        h.params.validate()?;
        h.rebuild_lookup();
        Ok(h)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MotifError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MotifError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Description of the union of `segments`: the point-count weighted mean of
/// the segment descriptions.
pub(super) fn union_description(graph: &InstanceGraph, segments: &[usize]) -> DescriptionVector {
    if let [single] = segments {
        return graph.vertex(*single).description.clone().expect("checked description");
    }
    DescriptionVector::weighted_mean(segments.iter().map(|&s| {
        let v = graph.vertex(s);
        (v.description.as_ref().expect("checked description"), v.weight.max(1) as f64)
    }))
    .expect("non-empty segment set")
}

/// Next level of segment sets: unions of the endpoints of every edge, with
/// duplicates removed, joined wherever two sets share a segment.
fn propagate(nodes: &[Vec<usize>], edges: &[(usize, usize)], max_nodes: usize) -> (Vec<Vec<usize>>, Vec<(usize, usize)>) {
    let mut next: Vec<Vec<usize>> = Vec::new();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    for &(a, b) in edges {
        if next.len() >= max_nodes {
            break;
        }
        let mut union: Vec<usize> = nodes[a].iter().chain(&nodes[b]).copied().collect();
        union.sort_unstable();
        union.dedup();
        if !seen.contains_key(&union) {
            seen.insert(union.clone(), next.len());
            next.push(union);
        }
    }
    let mut containing: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, node) in next.iter().enumerate() {
        for &s in node {
            containing.entry(s).or_default().push(i);
        }
    }
    let mut joined = BTreeSet::new();
    for list in containing.values() {
        for (k, &i) in list.iter().enumerate() {
            for &j in &list[k + 1..] {
                joined.insert((i, j));
            }
        }
    }
    (next, joined.into_iter().collect())
}

fn mix(seed: u64, a: u64, b: u64, c: u64, d: u64) -> u64 {
    let mut x = seed;
    for v in [a, b, c, d] {
        x ^= v.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(x << 6).wrapping_add(x >> 2);
        x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x ^= x >> 31;
    }
    x
}
