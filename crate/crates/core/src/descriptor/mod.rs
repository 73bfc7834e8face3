//! Pose-invariant surface description: Darboux-frame pair features, FPFH
//! histograms, and the mean-histogram description of a segment.

mod divergence;

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GridIndex, OrientedCloud, Point3, Vector3};

pub use divergence::js_divergence;

pub const DEFAULT_BINS_PER_ANGLE: usize = 11;

#[derive(Debug, Error, PartialEq)]
pub enum DescriptorError {
    #[error("pair features need two distinct points")]
    CoincidentPoints,
    #[error("point {0} has no neighbor within the descriptor radius")]
    IsolatedPoint(usize),
    #[error("segment has no describable points")]
    EmptySegment,
    #[error("descriptor radius must be positive")]
    InvalidRadius,
    #[error("bins per angle must be at least 1")]
    InvalidBins,
}

/// Histogram on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DescriptionVector(Vec<f64>);

impl DescriptionVector {
    /// Normalizes `bins` to sum 1. An all-zero input becomes uniform.
    pub fn from_weights(mut bins: Vec<f64>) -> Self {
        debug_assert!(bins.iter().all(|b| *b >= 0.0 && b.is_finite()));
        let total: f64 = bins.iter().sum();
        if total > 0.0 {
            bins.iter_mut().for_each(|b| *b /= total);
        } else {
            let uniform = 1.0 / bins.len() as f64;
            bins.iter_mut().for_each(|b| *b = uniform);
        }
        Self(bins)
    }

    pub fn bins(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn js(&self, other: &Self) -> f64 {
        js_divergence(&self.0, &other.0)
    }

    /// Mean of several descriptions weighted by `weights`, renormalized.
    pub fn weighted_mean<'a>(parts: impl IntoIterator<Item = (&'a DescriptionVector, f64)>) -> Option<Self> {
        let mut acc: Option<Vec<f64>> = None;
        for (d, w) in parts {
            let acc = acc.get_or_insert_with(|| vec![0.0; d.len()]);
            for (a, b) in acc.iter_mut().zip(&d.0) {
                *a += w * b;
            }
        }
        acc.map(Self::from_weights)
    }
}

impl AsRef<[f64]> for DescriptionVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Darboux-frame angles between two oriented points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures {
    /// `v · n_t`, in [-1, 1].
    pub alpha: f64,
    /// `u · d / |d|`, in [-1, 1].
    pub phi: f64,
    /// `atan2(w · n_t, u · n_t)`, in [-π, π].
    pub theta: f64,
}

/// Pair features with the source chosen as the point whose normal makes the
/// smaller angle with the connecting line.
///
/// When the frame is undefined (source normal parallel to the connecting
/// line) all three angles are zero.
pub fn pair_features(
    p1: &Point3,
    n1: &Vector3,
    p2: &Point3,
    n2: &Vector3,
) -> Result<PairFeatures, DescriptorError> {
    match darboux(p1, n1, p2, n2) {
        Frame::Coincident => Err(DescriptorError::CoincidentPoints),
        Frame::Degenerate => Ok(PairFeatures {
            alpha: 0.0,
            phi: 0.0,
            theta: 0.0,
        }),
        Frame::Valid(f) => Ok(f),
    }
}

enum Frame {
    Coincident,
    Degenerate,
    Valid(PairFeatures),
}

fn darboux(p1: &Point3, n1: &Vector3, p2: &Point3, n2: &Vector3) -> Frame {
    let d = p2 - p1;
    let dist = d.norm();
    if dist == 0.0 {
        return Frame::Coincident;
    }
    let d = d / dist;
    let (c1, c2) = (n1.dot(&d).abs(), n2.dot(&d).abs());
    // Equal angles: break the tie by point order so swapping inputs agrees.
    let keep = match c1.partial_cmp(&c2).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => lexicographic(p1, p2) != Ordering::Greater,
    };
    let (u, target, d) = if keep { (n1, n2, d) } else { (n2, n1, -d) };
    let v = d.cross(u);
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return Frame::Degenerate;
    }
    let v = v / v_norm;
    let w = u.cross(&v);
    Frame::Valid(PairFeatures {
        alpha: v.dot(target).clamp(-1.0, 1.0),
        phi: u.dot(&d).clamp(-1.0, 1.0),
        theta: w.dot(target).atan2(u.dot(target)),
    })
}

fn canonical(cloud: &OrientedCloud, i: usize, j: usize) -> Ordering {
    let (ni, nj) = (cloud.normal(i), cloud.normal(j));
    lexicographic(cloud.position(i), cloud.position(j))
        .then(ni.x.total_cmp(&nj.x))
        .then(ni.y.total_cmp(&nj.y))
        .then(ni.z.total_cmp(&nj.z))
}

fn lexicographic(a: &Point3, b: &Point3) -> Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

fn bin(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = ((value - lo) / (hi - lo) * bins as f64).floor();
    (t.max(0.0) as usize).min(bins - 1)
}

/// FPFH parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpfhParams {
    pub radius: f64,
    pub bins_per_angle: usize,
}

impl FpfhParams {
    pub fn new(radius: f64) -> Self {
        Self {
            radius,
            bins_per_angle: DEFAULT_BINS_PER_ANGLE,
        }
    }

    fn validate(&self) -> Result<(), DescriptorError> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(DescriptorError::InvalidRadius);
        }
        if self.bins_per_angle == 0 {
            return Err(DescriptorError::InvalidBins);
        }
        Ok(())
    }
}

/// FPFH for every point; `None` where a point has no neighbor in the radius.
pub fn fpfh_partial(
    cloud: &OrientedCloud,
    params: FpfhParams,
) -> Result<Vec<Option<DescriptionVector>>, DescriptorError> {
    params.validate()?;
    let bins = params.bins_per_angle;
    let index = GridIndex::new(cloud.positions(), params.radius);

    // Neighbor lists exclude the point itself and exact duplicates.
    let neighbors: Vec<Vec<(usize, f64)>> = (0..cloud.len())
        .map(|i| {
            let p = cloud.position(i);
            let mut hood = Vec::new();
            index.for_each_within(p, params.radius, |j, d2| {
                if j != i && d2 > 0.0 {
                    hood.push((j, d2.sqrt()));
                }
            });
            // Position order keeps sums identical under point permutation.
            hood.sort_unstable_by(|a, b| canonical(cloud, a.0, b.0));
            hood
        })
        .collect();

    let spfh: Vec<Vec<f64>> = (0..cloud.len())
        .map(|i| {
            let mut h = vec![0.0; 3 * bins];
            let mut used = 0usize;
            for &(j, _) in &neighbors[i] {
                let Frame::Valid(f) = darboux(
                    cloud.position(i),
                    cloud.normal(i),
                    cloud.position(j),
                    cloud.normal(j),
                ) else {
                    continue;
                };
                h[bin(f.alpha, -1.0, 1.0, bins)] += 1.0;
                h[bins + bin(f.phi, -1.0, 1.0, bins)] += 1.0;
                h[2 * bins + bin(f.theta, -PI, PI, bins)] += 1.0;
                used += 1;
            }
            if used > 0 {
                h.iter_mut().for_each(|x| *x /= used as f64);
            }
            h
        })
        .collect();

    Ok((0..cloud.len())
        .map(|i| {
            let hood = &neighbors[i];
            if hood.is_empty() {
                return None;
            }
            let mut h = spfh[i].clone();
            let k = hood.len() as f64;
            for &(j, dist) in hood {
                for (a, b) in h.iter_mut().zip(&spfh[j]) {
                    *a += b / (dist * k);
                }
            }
            Some(DescriptionVector::from_weights(h))
        })
        .collect())
}

/// FPFH for every point; fails on the first point without neighbors.
pub fn fpfh(cloud: &OrientedCloud, params: FpfhParams) -> Result<Vec<DescriptionVector>, DescriptorError> {
    fpfh_partial(cloud, params)?
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.ok_or(DescriptorError::IsolatedPoint(i)))
        .collect()
}

/// Mean FPFH over the points of a segment, renormalized.
///
/// Point histograms are computed over the whole cloud, so neighbors outside
/// the segment contribute to the members' histograms.
pub fn describe_segment(
    segment: &[usize],
    cloud: &OrientedCloud,
    params: FpfhParams,
) -> Result<DescriptionVector, DescriptorError> {
    PointDescriptions::compute(cloud, params)?
        .describe(segment)
        .map(|(d, _)| d)
}

/// Per-point histograms of one cloud, reused across segment descriptions.
#[derive(Debug, Clone)]
pub struct PointDescriptions {
    per_point: Vec<Option<DescriptionVector>>,
    /// Rank of each point in position order; fixes the summation order.
    rank: Vec<usize>,
}

impl PointDescriptions {
    /// Wraps precomputed histograms; members are summed in index order.
    pub fn new(per_point: Vec<Option<DescriptionVector>>) -> Self {
        let rank = (0..per_point.len()).collect();
        Self { per_point, rank }
    }

    pub fn compute(cloud: &OrientedCloud, params: FpfhParams) -> Result<Self, DescriptorError> {
        let per_point = fpfh_partial(cloud, params)?;
        let mut order: Vec<usize> = (0..cloud.len()).collect();
        order.sort_by(|&a, &b| canonical(cloud, a, b));
        let mut rank = vec![0; cloud.len()];
        for (r, i) in order.into_iter().enumerate() {
            rank[i] = r;
        }
        Ok(Self { per_point, rank })
    }

    pub fn get(&self, i: usize) -> Option<&DescriptionVector> {
        self.per_point[i].as_ref()
    }

    /// Description of `indices` and the number of points that contributed.
    pub fn describe(&self, indices: &[usize]) -> Result<(DescriptionVector, usize), DescriptorError> {
        let mut ordered = indices.to_vec();
        ordered.sort_unstable_by_key(|&i| self.rank[i]);
        let mut used = 0usize;
        let mean = DescriptionVector::weighted_mean(
            ordered
                .iter()
                .filter_map(|&i| self.per_point[i].as_ref())
                .inspect(|_| used += 1)
                .map(|d| (d, 1.0)),
        );
        match mean {
            Some(d) if used > 0 => Ok((d, used)),
            _ => Err(DescriptorError::EmptySegment),
        }
    }
}
