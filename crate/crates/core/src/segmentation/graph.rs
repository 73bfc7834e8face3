use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptionVector;
use crate::dictionary::WordId;

/// A set of point indices into the parent cloud.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: usize,
    /// Sorted, unique.
    pub indices: Vec<usize>,
}

impl Segment {
    pub fn new(id: usize, mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { id, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Vertex payload: the segment plus its optional description and word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentVertex {
    pub segment: Segment,
    pub description: Option<DescriptionVector>,
    /// Number of points that contributed to `description`.
    pub weight: usize,
    pub word: Option<WordId>,
}

impl SegmentVertex {
    pub fn new(segment: Segment) -> Self {
        Self {
            segment,
            description: None,
            weight: 0,
            word: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("vertex {0} does not exist")]
    NoSuchVertex(usize),
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
}

/// Undirected simple graph of object segments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InstanceGraph {
    vertices: Vec<SegmentVertex>,
    adjacency: Vec<BTreeSet<usize>>,
}

impl InstanceGraph {
    pub fn new(segments: Vec<Segment>) -> Self {
        let n = segments.len();
        Self {
            vertices: segments.into_iter().map(SegmentVertex::new).collect(),
            adjacency: vec![BTreeSet::new(); n],
        }
    }

    pub fn from_vertices(vertices: Vec<SegmentVertex>) -> Self {
        let n = vertices.len();
        Self {
            vertices,
            adjacency: vec![BTreeSet::new(); n],
        }
    }

    /// Adds `{a, b}`; returns false if the edge already existed.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<bool, GraphError> {
        for v in [a, b] {
            if v >= self.vertices.len() {
                return Err(GraphError::NoSuchVertex(v));
            }
        }
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        let fresh = self.adjacency[a].insert(b);
        self.adjacency[b].insert(a);
        Ok(fresh)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(a).is_some_and(|s| s.contains(&b))
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[SegmentVertex] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &SegmentVertex {
        &self.vertices[i]
    }

    pub fn vertex_mut(&mut self, i: usize) -> &mut SegmentVertex {
        &mut self.vertices[i]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Edges as `(low, high)` pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, set)| set.range(a + 1..).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Merges vertex `from` into `into`: unions point sets and adjacencies and
    /// removes `from`. Indices above `from` shift down by one. Description
    /// and word of the merged vertex are cleared.
    pub fn merge(&mut self, into: usize, from: usize) {
        assert!(into != from && into < self.len() && from < self.len());
        let moved = std::mem::take(&mut self.vertices[from].segment.indices);
        let target = &mut self.vertices[into];
        target.segment.indices.extend(moved);
        target.segment.indices.sort_unstable();
        target.description = None;
        target.weight = 0;
        target.word = None;

        let from_adj = std::mem::take(&mut self.adjacency[from]);
        for n in from_adj {
            self.adjacency[n].remove(&from);
            if n != into {
                self.adjacency[into].insert(n);
                self.adjacency[n].insert(into);
            }
        }
        self.vertices.remove(from);
        self.adjacency.remove(from);
        for set in &mut self.adjacency {
            *set = set
                .iter()
                .map(|&v| if v > from { v - 1 } else { v })
                .collect();
        }
    }

    /// Removes vertex `i` and its edges. Indices above `i` shift down by one.
    pub fn remove_vertex(&mut self, i: usize) {
        let adj = std::mem::take(&mut self.adjacency[i]);
        for n in adj {
            self.adjacency[n].remove(&i);
        }
        self.vertices.remove(i);
        self.adjacency.remove(i);
        for set in &mut self.adjacency {
            *set = set.iter().map(|&v| if v > i { v - 1 } else { v }).collect();
        }
    }

    /// Words of every vertex, if all are assigned.
    pub fn words(&self) -> Option<Vec<WordId>> {
        self.vertices.iter().map(|v| v.word).collect()
    }
}
