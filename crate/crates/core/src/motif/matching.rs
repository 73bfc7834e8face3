use std::collections::BTreeSet;
use std::ops::ControlFlow;

use super::WordMotif;

/// Visits every label-preserving injective map from `motif` vertices to
/// `target` vertices that sends motif edges to target edges.
///
/// An embedding is passed as a slice indexed by motif vertex. The visit
/// order is deterministic but not sorted; return `Break` to stop early.
pub fn for_each_embedding<F>(motif: &WordMotif, target: &WordMotif, mut visit: F)
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    let n = motif.order();
    if n == 0 || n > target.order() || !label_multiset_fits(motif, target) {
        return;
    }
    let order = search_order(motif);
    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; target.order()];
    let _ = extend(motif, target, &order, 0, &mut image, &mut used, &mut visit);
}

/// All embeddings, sorted lexicographically.
pub fn match_activation(motif: &WordMotif, target: &WordMotif) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_embedding(motif, target, |e| {
        out.push(e.to_vec());
        ControlFlow::Continue(())
    });
    out.sort_unstable();
    out
}

/// Distinct target vertex sets covered by embeddings, sorted
/// lexicographically. Enumeration stops after `max_embeddings` embeddings.
pub fn matched_vertex_sets(motif: &WordMotif, target: &WordMotif, max_embeddings: usize) -> Vec<Vec<usize>> {
    let mut sets = BTreeSet::new();
    let mut visited = 0usize;
    for_each_embedding(motif, target, |e| {
        let mut s = e.to_vec();
        s.sort_unstable();
        sets.insert(s);
        visited += 1;
        if visited >= max_embeddings {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    sets.into_iter().collect()
}

fn label_multiset_fits(motif: &WordMotif, target: &WordMotif) -> bool {
    let mut need: Vec<_> = motif.labels().to_vec();
    let mut have: Vec<_> = target.labels().to_vec();
    need.sort_unstable();
    have.sort_unstable();
    let mut j = 0;
    for w in need {
        while j < have.len() && have[j] < w {
            j += 1;
        }
        if j == have.len() || have[j] != w {
            return false;
        }
        j += 1;
    }
    true
}

/// Highest degree first, then breadth-first so later vertices usually have
/// an already-placed neighbor.
fn search_order(motif: &WordMotif) -> Vec<usize> {
    let n = motif.order();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&v| !placed[v])
            .max_by_key(|&v| (motif.degree(v), std::cmp::Reverse(v)))
            .expect("unplaced vertex");
        placed[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &u in motif.neighbors(v) {
                if !placed[u] {
                    placed[u] = true;
                    order.push(u);
                }
            }
        }
    }
    order
}

fn extend<F>(
    motif: &WordMotif,
    target: &WordMotif,
    order: &[usize],
    depth: usize,
    image: &mut [usize],
    used: &mut [bool],
    visit: &mut F,
) -> ControlFlow<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    if depth == order.len() {
        return visit(image);
    }
    let v = order[depth];
    let anchor = motif.neighbors(v).iter().copied().find(|&u| image[u] != usize::MAX);
    let candidates: Vec<usize> = match anchor {
        Some(u) => target.neighbors(image[u]).to_vec(),
        None => (0..target.order()).collect(),
    };
    for c in candidates {
        if used[c] || target.label(c) != motif.label(v) || target.degree(c) < motif.degree(v) {
            continue;
        }
        let consistent = motif
            .neighbors(v)
            .iter()
            .all(|&u| image[u] == usize::MAX || target.has_edge(image[u], c));
        if !consistent {
            continue;
        }
        image[v] = c;
        used[c] = true;
        let flow = extend(motif, target, order, depth + 1, image, used, visit);
        image[v] = usize::MAX;
        used[c] = false;
        flow?;
    }
    ControlFlow::Continue(())
}
