//! Synthetic single-viewpoint scans of primitive shapes.
//!
//! Surfaces are sampled on deterministic lattices at roughly the requested
//! spacing, back faces are culled against the viewpoint, and isotropic
//! Gaussian noise is added to the surviving positions. Normals stay analytic.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Isometry3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GeometryError, OrientedCloud, Point3, Vector3};

/// Primitive shape with its dimensions in meters, centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    /// Closed box with edge lengths along x, y, z.
    Box { size: [f64; 3] },
    Sphere { radius: f64 },
    /// Closed cylinder with its axis along z.
    Cylinder { radius: f64, height: f64 },
    /// Open hemispherical shell, opening towards +z, both sides visible.
    Bowl { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Box,
    Sphere,
    Cylinder,
    Bowl,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::Box,
        ShapeKind::Sphere,
        ShapeKind::Cylinder,
        ShapeKind::Bowl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Box => "box",
            ShapeKind::Sphere => "sphere",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Bowl => "bowl",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown shape kind `{s}` (expected box, sphere, cylinder or bowl)"))
    }
}

impl Shape {
    pub fn kind(&self) -> ShapeKind {
        match self {
            Shape::Box { .. } => ShapeKind::Box,
            Shape::Sphere { .. } => ShapeKind::Sphere,
            Shape::Cylinder { .. } => ShapeKind::Cylinder,
            Shape::Bowl { .. } => ShapeKind::Bowl,
        }
    }

    fn dimensions(&self) -> Vec<f64> {
        match *self {
            Shape::Box { size } => size.to_vec(),
            Shape::Sphere { radius } | Shape::Bowl { radius } => vec![radius],
            Shape::Cylinder { radius, height } => vec![radius, height],
        }
    }

    /// Surface samples (position, outward normal) in the shape frame.
    fn sample(&self, spacing: f64) -> Vec<(Point3, Vector3)> {
        match *self {
            Shape::Box { size } => sample_box(size, spacing),
            Shape::Sphere { radius } => sample_sphere(radius, spacing),
            Shape::Cylinder { radius, height } => sample_cylinder(radius, height, spacing),
            Shape::Bowl { radius } => sample_bowl(radius, spacing),
        }
    }

    /// Whether the segment from `eye` to surface sample `target` is blocked by
    /// another part of the surface. Only the bowl is non-convex.
    fn occludes(&self, eye: &Point3, target: &Point3) -> bool {
        match *self {
            Shape::Bowl { radius } => bowl_occludes(radius, eye, target),
            _ => false,
        }
    }
}

/// Everything needed to reproduce one synthetic scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: Shape,
    /// Shape frame to world frame.
    pub pose: Isometry3<f64>,
    pub sample_spacing: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ShapeSpec {
    pub fn new(shape: Shape, sample_spacing: f64, noise_sigma: f64, seed: u64) -> Self {
        Self {
            shape,
            pose: Isometry3::identity(),
            sample_spacing,
            noise_sigma,
            seed,
        }
    }

    pub fn with_pose(mut self, pose: Isometry3<f64>) -> Self {
        self.pose = pose;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self
            .shape
            .dimensions()
            .iter()
            .any(|d| !(d.is_finite() && *d > 0.0))
        {
            return Err(GeometryError::InvalidSpec(
                "dimensions must be positive and finite".into(),
            ));
        }
        if !(self.sample_spacing.is_finite() && self.sample_spacing > 0.0) {
            return Err(GeometryError::InvalidSpec("sample_spacing must be > 0".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(GeometryError::InvalidSpec("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Renders the part of `spec` visible from `viewpoint` (world frame).
pub fn synth_view(spec: &ShapeSpec, viewpoint: &Point3) -> Result<OrientedCloud, GeometryError> {
    spec.validate()?;
    let eye = spec.pose.inverse_transform_point(viewpoint);
    let visible: Vec<(Point3, Vector3)> = spec
        .shape
        .sample(spec.sample_spacing)
        .into_iter()
        .filter(|(p, n)| n.dot(&(eye - p)) > 0.0 && !spec.shape.occludes(&eye, p))
        .collect();
    if visible.is_empty() {
        return Err(GeometryError::DegenerateView);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sigma).expect("sigma validated"));
    let mut positions = Vec::with_capacity(visible.len());
    let mut normals = Vec::with_capacity(visible.len());
    for (p, n) in visible {
        let mut world = spec.pose * p;
        if let Some(noise) = &noise {
            world += Vector3::new(
                noise.sample(&mut rng),
                noise.sample(&mut rng),
                noise.sample(&mut rng),
            );
        }
        positions.push(world);
        normals.push((spec.pose.rotation * n).normalize());
    }
    OrientedCloud::new(positions, normals)
}

fn steps(length: f64, spacing: f64) -> usize {
    ((length / spacing).round() as usize).max(1)
}

/// Midpoints of `n` equal cells over `[-length/2, length/2]`.
fn centered(length: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| (i as f64 + 0.5) * length / n as f64 - length / 2.0)
}

fn sample_box(size: [f64; 3], spacing: f64) -> Vec<(Point3, Vector3)> {
    let mut out = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let (nu, nv) = (steps(size[u], spacing), steps(size[v], spacing));
        for sign in [1.0, -1.0] {
            let mut normal = Vector3::zeros();
            normal[axis] = sign;
            for a in centered(size[u], nu) {
                for b in centered(size[v], nv) {
                    let mut p = Point3::origin();
                    p[axis] = sign * size[axis] / 2.0;
                    p[u] = a;
                    p[v] = b;
                    out.push((p, normal));
                }
            }
        }
    }
    out
}

/// Fibonacci lattice over the band `z/r ∈ [z_lo, z_hi]` of a sphere.
fn fibonacci_band(radius: f64, spacing: f64, z_lo: f64, z_hi: f64) -> Vec<Vector3> {
    let area = 2.0 * PI * radius * radius * (z_hi - z_lo);
    let n = ((area / (spacing * spacing)).round() as usize).max(1);
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = z_hi - (z_hi - z_lo) * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * i as f64;
            Vector3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

fn sample_sphere(radius: f64, spacing: f64) -> Vec<(Point3, Vector3)> {
    fibonacci_band(radius, spacing, -1.0, 1.0)
        .into_iter()
        .map(|d| (Point3::from(d * radius), d))
        .collect()
}

fn sample_cylinder(radius: f64, height: f64, spacing: f64) -> Vec<(Point3, Vector3)> {
    let mut out = Vec::new();
    let around = steps(2.0 * PI * radius, spacing);
    for i in 0..around {
        let a = (i as f64 + 0.5) * 2.0 * PI / around as f64;
        let n = Vector3::new(a.cos(), a.sin(), 0.0);
        for z in centered(height, steps(height, spacing)) {
            out.push((Point3::new(radius * n.x, radius * n.y, z), n));
        }
    }
    let rings = steps(radius, spacing);
    for sign in [1.0, -1.0] {
        for k in 0..rings {
            let rr = (k as f64 + 0.5) * radius / rings as f64;
            let count = steps(2.0 * PI * rr, spacing);
            for j in 0..count {
                // Stagger consecutive rings so the cap has no radial seams.
                let a = (j as f64 + 0.5 * (k % 2) as f64) * 2.0 * PI / count as f64;
                out.push((
                    Point3::new(rr * a.cos(), rr * a.sin(), sign * height / 2.0),
                    Vector3::new(0.0, 0.0, sign),
                ));
            }
        }
    }
    out
}

fn sample_bowl(radius: f64, spacing: f64) -> Vec<(Point3, Vector3)> {
    let dirs = fibonacci_band(radius, spacing, -1.0, 0.0);
    let outer = dirs.iter().map(|d| (Point3::from(d * radius), *d));
    let inner = dirs.iter().map(|d| (Point3::from(d * radius), -d));
    outer.chain(inner).collect()
}

fn bowl_occludes(radius: f64, eye: &Point3, target: &Point3) -> bool {
    // Sphere hits along eye + t (target - eye); the target itself sits at t = 1.
    let dir = target - eye;
    let a = dir.norm_squared();
    let b = 2.0 * eye.coords.dot(&dir);
    let c = eye.coords.norm_squared() - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return false;
    }
    let root = disc.sqrt();
    [(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)]
        .into_iter()
        .any(|t| t > 0.0 && t < 1.0 - 1e-6 && eye.z + t * dir.z <= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Translation3, UnitQuaternion};

    #[test]
    fn sphere_view_keeps_front_hemisphere() {
        let spec = ShapeSpec::new(Shape::Sphere { radius: 0.1 }, 0.01, 0.0, 1);
        let cloud = synth_view(&spec, &Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(!cloud.is_empty());
        assert!(cloud.positions().iter().all(|p| p.z > 0.0));
    }

    #[test]
    fn same_seed_same_cloud() {
        let pose = Isometry3::from_parts(
            Translation3::new(0.1, -0.2, 0.05),
            UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1),
        );
        let spec = ShapeSpec::new(
            Shape::Cylinder {
                radius: 0.05,
                height: 0.15,
            },
            0.008,
            0.004,
            99,
        )
        .with_pose(pose);
        let view = Point3::new(0.6, 0.4, 0.7);
        let a = synth_view(&spec, &view).unwrap();
        let b = synth_view(&spec, &view).unwrap();
        assert_eq!(a, b);
        let other = synth_view(&ShapeSpec { seed: 100, ..spec }, &view).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn noiseless_box_points_lie_on_faces() {
        let spec = ShapeSpec::new(Shape::Box { size: [0.2, 0.2, 0.2] }, 0.01, 0.0, 3);
        let cloud = synth_view(&spec, &Point3::new(0.7, 0.5, 0.9)).unwrap();
        for p in cloud.positions() {
            let on_face = (0..3).any(|a| (p[a].abs() - 0.1).abs() <= 1e-9);
            let inside = (0..3).all(|a| p[a].abs() <= 0.1 + 1e-9);
            assert!(on_face && inside, "{p:?}");
        }
        // Three faces are visible from a generic octant viewpoint.
        for axis in 0..3 {
            assert!(cloud.positions().iter().any(|p| (p[axis] - 0.1).abs() < 1e-9));
        }
    }

    #[test]
    fn culling_definition_holds() {
        let view = Point3::new(-0.4, 0.3, 0.8);
        for shape in [
            Shape::Box { size: [0.1, 0.15, 0.2] },
            Shape::Sphere { radius: 0.07 },
            Shape::Cylinder {
                radius: 0.04,
                height: 0.12,
            },
            Shape::Bowl { radius: 0.08 },
        ] {
            let cloud = synth_view(&ShapeSpec::new(shape, 0.01, 0.0, 0), &view).unwrap();
            for (p, n) in cloud.positions().iter().zip(cloud.normals()) {
                assert!(n.dot(&(view - p)) > 0.0);
            }
        }
    }

    #[test]
    fn bowl_viewed_from_above_shows_inside() {
        let spec = ShapeSpec::new(Shape::Bowl { radius: 0.1 }, 0.01, 0.0, 0);
        let cloud = synth_view(&spec, &Point3::new(0.0, 0.0, 1.0)).unwrap();
        // Only the inner sheet (normals towards the center) faces the viewer.
        for (p, n) in cloud.positions().iter().zip(cloud.normals()) {
            assert!(n.dot(&p.coords) < 0.0);
        }
        // From the side, the near wall hides part of the far inner wall.
        let side = synth_view(&spec, &Point3::new(1.0, 0.0, 0.3)).unwrap();
        let inner_far = side
            .positions()
            .iter()
            .zip(side.normals())
            .filter(|(p, n)| n.dot(&p.coords) < 0.0 && p.x < 0.0)
            .count();
        let unoccluded = sample_bowl(0.1, 0.01)
            .into_iter()
            .filter(|(p, n)| {
                n.dot(&p.coords) < 0.0 && p.x < 0.0 && n.dot(&(Point3::new(1.0, 0.0, 0.3) - p)) > 0.0
            })
            .count();
        assert!(inner_far < unoccluded);
    }

    #[test]
    fn culled_everything_is_degenerate() {
        // Viewpoint inside a closed sphere sees only back faces.
        let spec = ShapeSpec::new(Shape::Sphere { radius: 0.1 }, 0.01, 0.0, 0);
        assert!(matches!(
            synth_view(&spec, &Point3::origin()),
            Err(GeometryError::DegenerateView)
        ));
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = ShapeSpec::new(Shape::Sphere { radius: -1.0 }, 0.01, 0.0, 0);
        assert!(bad.validate().is_err());
        let bad = ShapeSpec::new(Shape::Sphere { radius: 1.0 }, 0.0, 0.0, 0);
        assert!(bad.validate().is_err());
        let bad = ShapeSpec::new(Shape::Sphere { radius: 1.0 }, 0.01, -0.1, 0);
        assert!(bad.validate().is_err());
    }
}
