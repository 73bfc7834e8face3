use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::geometry::pcd::{load_pcd, save_pcd};
use crate::geometry::synth::ShapeKind;
use crate::geometry::{synth_view, OrientedCloud, Point3, Shape, ShapeSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub id: String,
    pub label: String,
    pub cloud: OrientedCloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Provenance {
    Synthetic { params: BenchmarkParams },
    Directory { root: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// Sorted, unique.
    pub labels: Vec<String>,
    /// Sorted by (label, id).
    pub instances: Vec<LabeledInstance>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(labels: Vec<String>, mut instances: Vec<LabeledInstance>, provenance: Provenance) -> Result<Self, EvaluationError> {
        let mut labels = labels;
        labels.sort();
        labels.dedup();
        instances.sort_by(|a, b| (&a.label, &a.id).cmp(&(&b.label, &b.id)));
        let mut ids: Vec<&str> = instances.iter().map(|i| i.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(EvaluationError::DuplicateId(w[0].to_string()));
        }
        if let Some(i) = instances.iter().find(|i| labels.binary_search(&i.label).is_err()) {
            return Err(EvaluationError::UnknownLabel(i.label.clone()));
        }
        Ok(Self {
            labels,
            instances,
            provenance,
        })
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn counts(&self) -> BTreeMap<&str, usize> {
        let mut out: BTreeMap<&str, usize> = self.labels.iter().map(|l| (l.as_str(), 0)).collect();
        for i in &self.instances {
            *out.entry(i.label.as_str()).or_default() += 1;
        }
        out
    }
}

/// Reads `<root>/<label>/<id>.pcd`. Normals missing from a file are
/// estimated from `normal_k` neighbors, oriented towards the origin.
pub fn load_dataset(root: impl AsRef<Path>, normal_k: usize) -> Result<LabeledDataset, EvaluationError> {
    let root = root.as_ref();
    let mut labels = Vec::new();
    let mut files = Vec::new();
    for entry in sorted_entries(root)? {
        if !entry.is_dir() {
            continue;
        }
        let label = file_name(&entry);
        for file in sorted_entries(&entry)? {
            if file.extension().is_some_and(|e| e == "pcd") {
                let id = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                files.push((id, label.clone(), file));
            }
        }
        labels.push(label);
    }
    if files.is_empty() {
        return Err(EvaluationError::EmptyDataset(root.to_path_buf()));
    }
    let instances = files
        .into_par_iter()
        .map(|(id, label, path)| {
            let cloud = load_pcd(&path)
                .and_then(|c| c.into_oriented(normal_k, &Point3::origin()))
                .map_err(|source| EvaluationError::Instance {
                    path: path.clone(),
                    source,
                })?;
            Ok(LabeledInstance { id, label, cloud })
        })
        .collect::<Result<Vec<_>, EvaluationError>>()?;
    LabeledDataset::new(
        labels,
        instances,
        Provenance::Directory {
            root: root.to_path_buf(),
        },
    )
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, EvaluationError> {
    let mut out = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?;
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes every instance as `<root>/<label>/<id>.pcd`.
pub fn save_dataset(dataset: &LabeledDataset, root: impl AsRef<Path>) -> Result<(), EvaluationError> {
    let root = root.as_ref();
    for label in &dataset.labels {
        fs::create_dir_all(root.join(label))?;
    }
    for inst in &dataset.instances {
        save_pcd(&inst.cloud, root.join(&inst.label).join(format!("{}.pcd", inst.id))).map_err(|source| {
            EvaluationError::Instance {
                path: root.join(&inst.label),
                source,
            }
        })?;
    }
    Ok(())
}

/// Synthetic benchmark of boxes, spheres, cylinders and bowls seen from
/// random viewpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkParams {
    pub per_label: usize,
    pub sample_spacing: f64,
    /// Noise standard deviation as a multiple of the sample spacing.
    pub noise_ratio: f64,
    pub seed: u64,
}

/// Random shape of `kind` with desk-object dimensions.
pub fn random_shape(kind: ShapeKind, rng: &mut impl Rng) -> Shape {
    match kind {
        ShapeKind::Box => Shape::Box {
            size: [
                rng.random_range(0.08..0.2),
                rng.random_range(0.08..0.2),
                rng.random_range(0.08..0.2),
            ],
        },
        ShapeKind::Sphere => Shape::Sphere {
            radius: rng.random_range(0.05..0.1),
        },
        ShapeKind::Cylinder => Shape::Cylinder {
            radius: rng.random_range(0.03..0.06),
            height: rng.random_range(0.1..0.2),
        },
        ShapeKind::Bowl => Shape::Bowl {
            radius: rng.random_range(0.06..0.1),
        },
    }
}

/// One scan of `kind`: random dimensions and yaw, viewed from 1 m at a
/// random azimuth and an elevation between 15 and 60 degrees.
pub fn random_scan(kind: ShapeKind, sample_spacing: f64, noise_sigma: f64, seed: u64) -> Result<OrientedCloud, EvaluationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = random_shape(kind, &mut rng);
    let yaw = rng.random_range(0.0..2.0 * PI);
    let azimuth = rng.random_range(0.0..2.0 * PI);
    let elevation = rng.random_range(15f64.to_radians()..60f64.to_radians());
    let pose = Isometry3::from_parts(Translation3::identity(), UnitQuaternion::from_euler_angles(0.0, 0.0, yaw));
    let viewpoint = Point3::new(
        elevation.cos() * azimuth.cos(),
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
    );
    let spec = ShapeSpec::new(shape, sample_spacing, noise_sigma, rng.random()).with_pose(pose);
    Ok(synth_view(&spec, &viewpoint)?)
}

pub fn synthetic_benchmark(params: BenchmarkParams) -> Result<LabeledDataset, EvaluationError> {
    let jobs: Vec<(ShapeKind, usize)> = ShapeKind::ALL
        .iter()
        .flat_map(|&k| (0..params.per_label).map(move |i| (k, i)))
        .collect();
    let noise = params.noise_ratio * params.sample_spacing;
    let instances = jobs
        .into_par_iter()
        .map(|(kind, i)| {
            let seed = params
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((kind as u64) << 32 | i as u64);
            Ok(LabeledInstance {
                id: format!("{}_{:04}", kind.name(), i),
                label: kind.name().to_string(),
                cloud: random_scan(kind, params.sample_spacing, noise, seed)?,
            })
        })
        .collect::<Result<Vec<_>, EvaluationError>>()?;
    LabeledDataset::new(
        ShapeKind::ALL.iter().map(|k| k.name().to_string()).collect(),
        instances,
        Provenance::Synthetic { params },
    )
}

/// Stratified split: per label, `round(ratio * n)` instances (at least one,
/// and at least one left for testing when `n > 1`) go to training. Returns
/// instance indices, each list sorted.
pub fn split(dataset: &LabeledDataset, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvaluationError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(EvaluationError::InvalidRatio(ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in &dataset.labels {
        let mut members: Vec<usize> = (0..dataset.instances.len())
            .filter(|&i| &dataset.instances[i].label == label)
            .collect();
        if members.is_empty() {
            return Err(EvaluationError::EmptyCategory(label.clone()));
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let mut k = (ratio * n as f64).round() as usize;
        k = k.max(1);
        if n > 1 {
            k = k.min(n - 1);
        }
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(counts: &[(&str, usize)]) -> LabeledDataset {
        let cloud = OrientedCloud::new(vec![Point3::origin()], vec![crate::geometry::Vector3::z()]).unwrap();
        let instances = counts
            .iter()
            .flat_map(|&(l, n)| {
                let cloud = cloud.clone();
                (0..n).map(move |i| LabeledInstance {
                    id: format!("{l}{i}"),
                    label: l.to_string(),
                    cloud: cloud.clone(),
                })
            })
            .collect();
        let labels = counts.iter().map(|(l, _)| l.to_string()).collect();
        LabeledDataset::new(labels, instances, Provenance::Directory { root: PathBuf::new() }).unwrap()
    }

    #[test]
    fn stratified_counts() {
        let d = toy(&[("a", 40), ("b", 40)]);
        let (train, test) = split(&d, 0.75, 3).unwrap();
        for label in ["a", "b"] {
            let count = |set: &[usize]| set.iter().filter(|&&i| d.instances[i].label == label).count();
            assert_eq!((count(&train), count(&test)), (30, 10));
        }
        assert_eq!(split(&d, 0.75, 3).unwrap(), (train.clone(), test.clone()));
        assert_ne!(split(&d, 0.75, 4).unwrap().0, train);
    }

    #[test]
    fn split_errors() {
        let d = toy(&[("a", 4), ("b", 0)]);
        assert!(matches!(split(&d, 0.5, 0), Err(EvaluationError::EmptyCategory(l)) if l == "b"));
        assert!(matches!(split(&d, 1.0, 0), Err(EvaluationError::InvalidRatio(_))));
    }

    #[test]
    fn benchmark_is_deterministic_and_roundtrips() {
        let params = BenchmarkParams {
            per_label: 2,
            sample_spacing: 0.01,
            noise_ratio: 0.5,
            seed: 5,
        };
        let a = synthetic_benchmark(params).unwrap();
        assert_eq!(a, synthetic_benchmark(params).unwrap());
        assert_eq!(a.labels, vec!["bowl", "box", "cylinder", "sphere"]);
        assert!(a.counts().values().all(|&c| c == 2));
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&a, dir.path()).unwrap();
        let back = load_dataset(dir.path(), 12).unwrap();
        assert_eq!(back.labels, a.labels);
        for (x, y) in back.instances.iter().zip(&a.instances) {
            assert_eq!((&x.id, &x.label, x.cloud.len()), (&y.id, &y.label, y.cloud.len()));
        }
    }
}
