use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::matching::for_each_embedding;
use super::MotifError;
use crate::dictionary::WordId;
use crate::segmentation::InstanceGraph;

/// Undirected simple graph with one word per vertex.
///
/// Motifs stored in a hierarchy are connected; the same type also carries
/// whole (possibly disconnected) object graphs as matching targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MotifRepr", into = "MotifRepr")]
pub struct WordMotif {
    labels: Vec<WordId>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct MotifRepr {
    labels: Vec<WordId>,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<MotifRepr> for WordMotif {
    type Error = MotifError;

    fn try_from(repr: MotifRepr) -> Result<Self, MotifError> {
        WordMotif::new(repr.labels, repr.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<WordMotif> for MotifRepr {
    fn from(m: WordMotif) -> Self {
        MotifRepr {
            edges: m.edges().map(|(a, b)| [a, b]).collect(),
            labels: m.labels,
        }
    }
}

/// Isomorphism invariant used to bucket motifs before the exact check.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MotifKey {
    edge_count: usize,
    /// Per vertex: label, degree and sorted neighbor labels; sorted.
    signature: Vec<(WordId, usize, Vec<WordId>)>,
}

impl WordMotif {
    pub fn new(labels: Vec<WordId>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, MotifError> {
        let n = labels.len();
        let mut sets = vec![BTreeSet::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(MotifError::InvalidMotif(format!("bad edge ({a}, {b}) for {n} vertices")));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        Ok(Self {
            labels,
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn single(word: WordId) -> Self {
        Self {
            labels: vec![word],
            adjacency: vec![Vec::new()],
        }
    }

    /// Word graph of a whole instance; every vertex must carry a word.
    pub fn from_instance(graph: &InstanceGraph) -> Result<Self, MotifError> {
        let labels = graph
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, v)| v.word.ok_or(MotifError::MissingWord(i)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(labels, graph.edges())
    }

    /// Subgraph induced by `vertices` (sorted) of `graph`; vertex `i` of the
    /// result corresponds to `vertices[i]`.
    pub fn induced(graph: &WordMotif, vertices: &[usize]) -> Self {
        let labels = vertices.iter().map(|&v| graph.labels[v]).collect();
        let adjacency = vertices
            .iter()
            .map(|&v| {
                graph.adjacency[v]
                    .iter()
                    .filter_map(|u| vertices.binary_search(u).ok())
                    .collect()
            })
            .collect();
        Self { labels, adjacency }
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[WordId] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> WordId {
        self.labels[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        if self.labels.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.order()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn key(&self) -> MotifKey {
        let mut signature: Vec<_> = (0..self.order())
            .map(|v| {
                let mut ns: Vec<WordId> = self.adjacency[v].iter().map(|&u| self.labels[u]).collect();
                ns.sort_unstable();
                (self.labels[v], ns.len(), ns)
            })
            .collect();
        signature.sort_unstable();
        MotifKey {
            edge_count: self.edge_count(),
            signature,
        }
    }

    /// Exact label-preserving isomorphism test.
    pub fn is_isomorphic(&self, other: &WordMotif) -> bool {
        if self.order() != other.order() || self.edge_count() != other.edge_count() || self.key() != other.key() {
            return false;
        }
        // With equal orders and edge counts, an edge-preserving bijection is
        // an isomorphism.
        let mut found = false;
        for_each_embedding(self, other, |_| {
            found = true;
            std::ops::ControlFlow::Break(())
        });
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(i: u32) -> WordId {
        WordId::new(2, i)
    }

    #[test]
    fn isomorphism_ignores_vertex_order() {
        let a = WordMotif::new(vec![w(0), w(1), w(2)], [(0, 1), (1, 2)]).unwrap();
        let b = WordMotif::new(vec![w(2), w(0), w(1)], [(2, 0), (2, 1)]).unwrap();
        assert!(a.is_isomorphic(&b));
        assert_eq!(a.key(), b.key());
        // Same labels, different center vertex.
        let c = WordMotif::new(vec![w(0), w(1), w(2)], [(0, 1), (0, 2)]).unwrap();
        assert!(!a.is_isomorphic(&c));
    }

    #[test]
    fn key_collision_resolved_exactly() {
        // Two triangles vs one hexagon: identical degree/label signatures.
        let l = vec![w(0); 6];
        let triangles = WordMotif::new(l.clone(), [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();
        let hexagon = WordMotif::new(l, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]).unwrap();
        assert_eq!(triangles.key(), hexagon.key());
        assert!(!triangles.is_isomorphic(&hexagon));
        assert!(!triangles.is_connected() && hexagon.is_connected());
    }

    #[test]
    fn induced_subgraph_and_json() {
        let g = WordMotif::new(vec![w(0), w(1), w(2), w(3)], [(0, 1), (1, 2), (2, 3), (0, 2)]).unwrap();
        let sub = WordMotif::induced(&g, &[0, 2, 3]);
        assert_eq!(sub.labels(), &[w(0), w(2), w(3)]);
        assert_eq!(sub.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        let text = serde_json::to_string(&sub).unwrap();
        let back: WordMotif = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sub);
        assert!(serde_json::from_str::<WordMotif>(r#"{"labels":[{"level":1,"index":0}],"edges":[[0,0]]}"#).is_err());
    }
}
