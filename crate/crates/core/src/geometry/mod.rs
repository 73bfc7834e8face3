//! Point-cloud primitives: oriented clouds, normal estimation, synthetic
//! single-view scans and ASCII PCD I/O.

mod index;
pub mod pcd;
pub mod synth;

use nalgebra::{Matrix3, SymmetricEigen};
use thiserror::Error;

pub use index::GridIndex;
pub use synth::{synth_view, Shape, ShapeSpec};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// Tolerance on the Euclidean length of a stored normal.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("need more than {k} points for a {k}-neighborhood, got {got}")]
    TooFewPoints { k: usize, got: usize },
    #[error("neighbor count must be at least 3, got {0}")]
    NeighborCount(usize),
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("normal {index} has length {length}, expected 1")]
    NotUnit { index: usize, length: f64 },
    #[error("positions and normals differ in length ({positions} vs {normals})")]
    LengthMismatch { positions: usize, normals: usize },
    #[error("back-face culling removed every sample")]
    DegenerateView,
    #[error("invalid shape specification: {0}")]
    InvalidSpec(String),
    #[error("pcd parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("pcd file lacks field `{0}`")]
    MissingField(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Points with unit surface normals.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedCloud {
    positions: Vec<Point3>,
    normals: Vec<Vector3>,
}

impl OrientedCloud {
    /// Builds a cloud, checking finiteness and unit-length normals.
    pub fn new(positions: Vec<Point3>, normals: Vec<Vector3>) -> Result<Self, GeometryError> {
        if positions.len() != normals.len() {
            return Err(GeometryError::LengthMismatch {
                positions: positions.len(),
                normals: normals.len(),
            });
        }
        for (i, (p, n)) in positions.iter().zip(&normals).enumerate() {
            if !p.coords.iter().chain(n.iter()).all(|c| c.is_finite()) {
                return Err(GeometryError::NonFinite(i));
            }
            let length = n.norm();
            if (length - 1.0).abs() > UNIT_TOLERANCE {
                return Err(GeometryError::NotUnit { index: i, length });
            }
        }
        Ok(Self { positions, normals })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn normals(&self) -> &[Vector3] {
        &self.normals
    }

    pub fn position(&self, i: usize) -> &Point3 {
        &self.positions[i]
    }

    pub fn normal(&self, i: usize) -> &Vector3 {
        &self.normals[i]
    }

    /// Applies a rigid motion to positions and normals.
    pub fn transformed(&self, motion: &nalgebra::Isometry3<f64>) -> Self {
        Self {
            positions: self.positions.iter().map(|p| motion * p).collect(),
            normals: self
                .normals
                .iter()
                .map(|n| (motion.rotation * n).normalize())
                .collect(),
        }
    }

    /// Sub-cloud made of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            normals: indices.iter().map(|&i| self.normals[i]).collect(),
        }
    }
}

/// PCA normal estimation over the `k` nearest neighbors of every point.
///
/// The neighborhood is the point itself plus its `k` nearest neighbors. Each
/// normal is the eigenvector of the smallest covariance eigenvalue, flipped so
/// that it faces `viewpoint`.
pub fn estimate_normals(
    positions: &[Point3],
    k: usize,
    viewpoint: &Point3,
) -> Result<OrientedCloud, GeometryError> {
    if k < 3 {
        return Err(GeometryError::NeighborCount(k));
    }
    if positions.len() <= k {
        return Err(GeometryError::TooFewPoints {
            k,
            got: positions.len(),
        });
    }
    if let Some(i) = positions
        .iter()
        .position(|p| !p.coords.iter().all(|c| c.is_finite()))
    {
        return Err(GeometryError::NonFinite(i));
    }

    let index = GridIndex::new(positions, mean_spacing_hint(positions, k));
    let normals = positions
        .iter()
        .map(|p| {
            let hood = index.nearest(p, k + 1);
            let n = smallest_eigenvector(hood.iter().map(|&i| &positions[i]));
            if n.dot(&(viewpoint - p)) < 0.0 {
                -n
            } else {
                n
            }
        })
        .collect();
    Ok(OrientedCloud {
        positions: positions.to_vec(),
        normals,
    })
}

fn smallest_eigenvector<'a>(points: impl Iterator<Item = &'a Point3> + Clone) -> Vector3 {
    let mut count = 0.0;
    let mut centroid = Vector3::zeros();
    for p in points.clone() {
        centroid += p.coords;
        count += 1.0;
    }
    centroid /= count;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / count);
    let (mut best, mut best_value) = (0, f64::INFINITY);
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v < best_value {
            best = i;
            best_value = v;
        }
    }
    let n = eig.eigenvectors.column(best).into_owned();
    let length = n.norm();
    if length > 0.0 {
        n / length
    } else {
        Vector3::z()
    }
}

/// Grid cell size giving roughly `k` points per cell for a surface sample.
fn mean_spacing_hint(positions: &[Point3], k: usize) -> f64 {
    let mut lo = positions[0].coords;
    let mut hi = lo;
    for p in positions {
        lo = lo.inf(&p.coords);
        hi = hi.sup(&p.coords);
    }
    let extent = hi - lo;
    let mut dims: Vec<f64> = extent.iter().copied().filter(|d| *d > 1e-12).collect();
    dims.sort_by(f64::total_cmp);
    // Treat the sample as a surface spanned by its two largest extents.
    let area = match dims.len() {
        0 => return 1.0,
        1 => dims[0] * dims[0],
        n => dims[n - 1] * dims[n - 2],
    };
    let spacing = (area / positions.len() as f64).sqrt();
    (spacing * (k as f64).sqrt()).max(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Isometry3, Translation3, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane_grid(n: usize, spacing: f64) -> Vec<Point3> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                out.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
            }
        }
        out
    }

    #[test]
    fn plane_normals_face_viewpoint() {
        let pts = plane_grid(12, 0.01);
        let cloud = estimate_normals(&pts, 8, &Point3::new(0.0, 0.0, 1.0)).unwrap();
        for n in cloud.normals() {
            assert!((n - Vector3::z()).norm() < 1e-6, "{n:?}");
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        // Fibonacci samples on the unit sphere; viewpoint at the center so
        // orientation flips inward, compared up to sign below.
        let n = 2000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<Point3> = (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                Point3::new(r * a.cos(), r * a.sin(), z)
            })
            .collect();
        let cloud = estimate_normals(&pts, 12, &Point3::origin()).unwrap();
        let good = cloud
            .positions()
            .iter()
            .zip(cloud.normals())
            .filter(|(p, nrm)| nrm.dot(&p.coords).abs().min(1.0).acos() <= 5f64.to_radians())
            .count();
        assert!(good as f64 >= 0.99 * n as f64, "{good} of {n}");
    }

    #[test]
    fn too_few_points() {
        let pts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(matches!(
            estimate_normals(&pts, 8, &Point3::origin()),
            Err(GeometryError::TooFewPoints { .. })
        ));
        assert!(matches!(
            estimate_normals(&pts, 2, &Point3::origin()),
            Err(GeometryError::NeighborCount(2))
        ));
    }

    #[test]
    fn rotation_equivariance_on_plane() {
        let pts = plane_grid(10, 0.01);
        let view = Point3::new(0.05, 0.05, 1.0);
        let base = estimate_normals(&pts, 8, &view).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let motion = Isometry3::from_parts(
                Translation3::new(rng.random(), rng.random(), rng.random()),
                UnitQuaternion::from_euler_angles(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                ),
            );
            let moved: Vec<Point3> = pts.iter().map(|p| motion * p).collect();
            let cloud = estimate_normals(&moved, 8, &(motion * view)).unwrap();
            for (a, b) in base.normals().iter().zip(cloud.normals()) {
                let expected = motion.rotation * a;
                let angle = expected.dot(b).clamp(-1.0, 1.0).acos();
                assert!(angle <= 1e-4, "angle {angle}");
            }
        }
    }

    #[test]
    fn cloud_rejects_non_unit_normals() {
        let err = OrientedCloud::new(vec![Point3::origin()], vec![Vector3::new(0.0, 0.0, 2.0)]);
        assert!(matches!(err, Err(GeometryError::NotUnit { index: 0, .. })));
    }
}
