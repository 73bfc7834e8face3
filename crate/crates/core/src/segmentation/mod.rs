//! Over-segmentation, the segment neighborhood graph, and normal-based
//! merging of adjacent segments (small segments first).

mod graph;

use std::collections::{HashMap, VecDeque};

use crate::geometry::{GridIndex, OrientedCloud, Point3, Vector3};

pub use graph::{GraphError, InstanceGraph, Segment, SegmentVertex};

/// Region-growing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OversegmentParams {
    /// Maximum angle between a region's seed normal and a joining point.
    pub angle_thresh_deg: f64,
    /// Segments smaller than this are merged into the closest segment.
    pub min_size: usize,
    /// Points closer than this are considered connected.
    pub neighbor_radius: f64,
}

/// Splits a cloud into spatially connected regions of similar normals.
///
/// Regions grow breadth-first from the lowest unassigned index; a neighbor
/// joins when its normal is within `angle_thresh_deg` of the seed normal.
/// Afterwards each undersized region (smallest first, ties by id) is merged
/// into the region owning the point closest to it. Segment ids are
/// `0..n` ordered by smallest member index.
pub fn oversegment(cloud: &OrientedCloud, params: OversegmentParams) -> Vec<Segment> {
    let n = cloud.len();
    if n == 0 {
        return Vec::new();
    }
    let index = GridIndex::new(cloud.positions(), params.neighbor_radius);
    let cos_limit = params.angle_thresh_deg.to_radians().cos();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut regions: Vec<Vec<usize>> = Vec::new();

    for seed in 0..n {
        if owner[seed].is_some() {
            continue;
        }
        let id = regions.len();
        let seed_normal = cloud.normal(seed);
        owner[seed] = Some(id);
        let mut members = vec![seed];
        let mut queue = VecDeque::from([seed]);
        while let Some(q) = queue.pop_front() {
            for nb in index.within_radius(cloud.position(q), params.neighbor_radius) {
                if owner[nb].is_none() && seed_normal.dot(cloud.normal(nb)) >= cos_limit {
                    owner[nb] = Some(id);
                    members.push(nb);
                    queue.push_back(nb);
                }
            }
        }
        regions.push(members);
    }

    let mut owner: Vec<usize> = owner.into_iter().map(|o| o.expect("every point assigned")).collect();
    merge_orphans(cloud, &mut regions, &mut owner, params.min_size);

    let mut segments: Vec<Segment> = regions
        .into_iter()
        .filter(|r| !r.is_empty())
        .map(|r| Segment::new(0, r))
        .collect();
    segments.sort_by_key(|s| s.indices[0]);
    for (id, s) in segments.iter_mut().enumerate() {
        s.id = id;
    }
    segments
}

fn merge_orphans(cloud: &OrientedCloud, regions: &mut [Vec<usize>], owner: &mut [usize], min_size: usize) {
    loop {
        let alive = regions.iter().filter(|r| !r.is_empty()).count();
        if alive <= 1 {
            return;
        }
        let Some(small) = regions
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty() && r.len() < min_size)
            .min_by_key(|(id, r)| (r.len(), *id))
            .map(|(id, _)| id)
        else {
            return;
        };
        // Closest foreign point to any member; ties resolve to lower indices.
        let mut best: Option<(f64, usize)> = None;
        for &i in &regions[small] {
            let p = cloud.position(i);
            for (j, q) in cloud.positions().iter().enumerate() {
                if owner[j] == small {
                    continue;
                }
                let d = (q - p).norm_squared();
                if best.is_none_or(|(bd, bj)| d < bd || (d == bd && j < bj)) {
                    best = Some((d, j));
                }
            }
        }
        let target = owner[best.expect("another region exists").1];
        let moved = std::mem::take(&mut regions[small]);
        for &i in &moved {
            owner[i] = target;
        }
        regions[target].extend(moved);
    }
}

/// Segment graph with an edge wherever two segments come within
/// `adjacency_radius` of each other.
pub fn build_instance_graph(segments: Vec<Segment>, cloud: &OrientedCloud, adjacency_radius: f64) -> InstanceGraph {
    let mut owner = vec![usize::MAX; cloud.len()];
    for (v, s) in segments.iter().enumerate() {
        for &i in &s.indices {
            owner[i] = v;
        }
    }
    let mut graph = InstanceGraph::new(segments);
    let index = GridIndex::new(cloud.positions(), adjacency_radius);
    for (i, p) in cloud.positions().iter().enumerate() {
        let a = owner[i];
        if a == usize::MAX {
            continue;
        }
        index.for_each_within(p, adjacency_radius, |j, _| {
            let b = owner[j];
            if b != usize::MAX && b != a {
                graph.add_edge(a, b).expect("valid vertices");
            }
        });
    }
    graph
}

fn mean_normal(cloud: &OrientedCloud, indices: impl Iterator<Item = usize>) -> Option<Vector3> {
    let mut sum = Vector3::zeros();
    let mut count = 0;
    for i in indices {
        sum += cloud.normal(i);
        count += 1;
    }
    let length = sum.norm();
    (count > 0 && length > 1e-12).then(|| sum / length)
}

/// Mean normals of each segment's border region towards the other segment.
///
/// The border region of `a` is the set of its points within `border_radius`
/// of some point of `b`. An empty border (or one whose normals cancel) falls
/// back to the whole-segment mean.
pub fn border_normals(a: &Segment, b: &Segment, cloud: &OrientedCloud, border_radius: f64) -> (Vector3, Vector3) {
    (
        border_normal(a, b, cloud, border_radius),
        border_normal(b, a, cloud, border_radius),
    )
}

fn border_normal(of: &Segment, towards: &Segment, cloud: &OrientedCloud, radius: f64) -> Vector3 {
    let others: Vec<Point3> = towards.indices.iter().map(|&i| *cloud.position(i)).collect();
    let index = GridIndex::new(&others, radius);
    let border = of
        .indices
        .iter()
        .copied()
        .filter(|&i| index.any_within(cloud.position(i), radius));
    mean_normal(cloud, border)
        .or_else(|| mean_normal(cloud, of.indices.iter().copied()))
        .unwrap_or_else(|| *cloud.normal(of.indices[0]))
}

/// Bounded cosine dissimilarity `(1 - cos)/2` of two unit vectors, in [0, 1].
pub fn dissimilarity(a: &Vector3, b: &Vector3) -> f64 {
    ((1.0 - a.dot(b)) / 2.0).clamp(0.0, 1.0)
}

/// Result of [`refine`].
#[derive(Debug, Clone)]
pub struct Refinement {
    pub graph: InstanceGraph,
    pub merges: usize,
}

/// (smaller size, smaller id, other id).
type SortKey = (usize, usize, usize);

/// Candidate merges as `(smaller, larger)` vertex pairs, ordered by the
/// smaller segment's size, then its id, then the other segment's id.
pub fn merge_order(graph: &InstanceGraph) -> Vec<(usize, usize)> {
    let mut order: Vec<(SortKey, (usize, usize))> = graph
        .edges()
        .map(|(a, b)| {
            let (sa, sb) = (&graph.vertex(a).segment, &graph.vertex(b).segment);
            if (sa.len(), sa.id) <= (sb.len(), sb.id) {
                ((sa.len(), sa.id, sb.id), (a, b))
            } else {
                ((sb.len(), sb.id, sa.id), (b, a))
            }
        })
        .collect();
    order.sort_unstable();
    order.into_iter().map(|(_, pair)| pair).collect()
}

/// Repeatedly merges the first adjacent pair (ordered by the smaller
/// segment's size, then its id, then the other id) whose border normals
/// have dissimilarity below `theta`; stops when no edge qualifies.
///
/// The smaller segment is absorbed by the larger one and the survivor keeps
/// the larger segment's id.
pub fn refine(mut graph: InstanceGraph, cloud: &OrientedCloud, theta: f64, border_radius: f64) -> Refinement {
    // Dissimilarity per unordered pair of segment ids; stale entries dropped on merge.
    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut merges = 0;
    loop {
        let mut merged = false;
        for (small, large) in merge_order(&graph) {
            let (id_small, id_large) = (graph.vertex(small).segment.id, graph.vertex(large).segment.id);
            let key = (id_small.min(id_large), id_small.max(id_large));
            let sigma = *cache.entry(key).or_insert_with(|| {
                let (ma, mb) = border_normals(
                    &graph.vertex(small).segment,
                    &graph.vertex(large).segment,
                    cloud,
                    border_radius,
                );
                dissimilarity(&ma, &mb)
            });
            if sigma < theta {
                graph.merge(large, small);
                cache.retain(|&(p, q), _| p != id_small && q != id_small && p != id_large && q != id_large);
                merges += 1;
                merged = true;
                break;
            }
        }
        if !merged {
            return Refinement { graph, merges };
        }
    }
}
