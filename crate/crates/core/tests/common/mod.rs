#![allow(dead_code)]

use rand::Rng;
use shape_motif::descriptor::DescriptionVector;
use shape_motif::dictionary::{Dictionary, WordId};
use shape_motif::motif::WordMotif;
use shape_motif::segmentation::{InstanceGraph, Segment, SegmentVertex};

/// Uniform random point of the probability simplex with `n` bins.
pub fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Described, word-annotated instance graph built by hand.
pub fn instance(words: &[u32], descriptions: &[Vec<f64>], edges: &[(usize, usize)], level: u32) -> InstanceGraph {
    let vertices = words
        .iter()
        .zip(descriptions)
        .enumerate()
        .map(|(i, (&w, d))| SegmentVertex {
            segment: Segment::new(i, vec![i]),
            description: Some(DescriptionVector::from_weights(d.clone())),
            weight: 1 + i,
            word: Some(WordId::new(level, w)),
        })
        .collect();
    let mut g = InstanceGraph::from_vertices(vertices);
    for &(a, b) in edges {
        g.add_edge(a, b).unwrap();
    }
    g
}

pub fn random_edges(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Every label-preserving injective map of motif vertices to target
/// vertices that sends motif edges to target edges, by plain recursion.
pub fn brute_force_embeddings(motif: &WordMotif, target: &WordMotif) -> Vec<Vec<usize>> {
    fn rec(motif: &WordMotif, target: &WordMotif, map: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let i = map.len();
        if i == motif.order() {
            let ok = motif.edges().all(|(a, b)| target.has_edge(map[a], map[b]));
            if ok {
                out.push(map.clone());
            }
            return;
        }
        for t in 0..target.order() {
            if !used[t] && target.label(t) == motif.label(i) {
                used[t] = true;
                map.push(t);
                rec(motif, target, map, used, out);
                map.pop();
                used[t] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(motif, target, &mut Vec::new(), &mut vec![false; target.order()], &mut out);
    out.sort();
    out
}

/// Nearest centroid of level `f` by scanning every word; ties go to the
/// word listed first.
pub fn exhaustive_assign(dict: &Dictionary, q: &[f64], f: u32) -> WordId {
    let mut best: Option<(f64, WordId)> = None;
    for w in dict.level(f).unwrap() {
        let d: f64 = q.iter().zip(&w.centroid).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, w.id));
        }
    }
    best.unwrap().1
}
