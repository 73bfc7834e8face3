use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::FpfhParams;
use crate::ensemble::{EnsembleParams, StimulusVariant};
use crate::evaluation::{BenchmarkParams, ExperimentParams};
use crate::motif::{Aggregation, HierarchyParams};
use crate::pipeline::PipelineParams;
use crate::segmentation::OversegmentParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("`--set {0}` must look like key=value")]
    BadOverride(String),
    #[error("{key} = {value} is out of range ({expected})")]
    OutOfRange { key: &'static str, value: String, expected: &'static str },
}

/// Every tunable of the pipeline. Radii left unset derive from
/// `sample_spacing_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sample_spacing_m: f64,
    pub noise_ratio: f64,
    pub normal_k: usize,
    pub angle_thresh_deg: f64,
    pub min_segment_size: usize,
    pub adjacency_radius_m: Option<f64>,
    pub border_radius_m: Option<f64>,
    pub theta: f64,
    pub fpfh_radius_m: Option<f64>,
    pub bins_per_angle: usize,
    pub n_levels: u32,
    pub kmeans_restarts: usize,
    pub sigma: f64,
    pub match_aggregation: Aggregation,
    pub max_prototypes_per_vertex_per_label: usize,
    pub max_propagation_nodes: usize,
    pub max_embeddings: usize,
    pub reject_threshold: f64,
    pub stimulus_variant: StimulusVariant,
    pub ratio: f64,
    pub seed: u64,
    pub repeats: usize,
    pub per_label: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sample_spacing_m: 0.008,
            noise_ratio: 0.5,
            normal_k: 12,
            angle_thresh_deg: 15.0,
            min_segment_size: 15,
            adjacency_radius_m: None,
            border_radius_m: None,
            theta: 0.3,
            fpfh_radius_m: None,
            bins_per_angle: 11,
            n_levels: 4,
            kmeans_restarts: 5,
            sigma: 0.025,
            match_aggregation: Aggregation::Max,
            max_prototypes_per_vertex_per_label: 0,
            max_propagation_nodes: 4096,
            max_embeddings: 100_000,
            reject_threshold: 0.30,
            stimulus_variant: StimulusVariant::Literal,
            ratio: 0.75,
            seed: 7,
            repeats: 1,
            per_label: 50,
        }
    }
}

/// `(key, default, unit and meaning)` for `--help`.
pub const CONFIG_KEYS: &[(&str, &str, &str)] = &[
    ("sample_spacing_m", "0.008", "m, synthetic surface sample spacing"),
    ("noise_ratio", "0.5", "synthetic noise sigma as a multiple of the spacing"),
    ("normal_k", "12", "neighbors for normal estimation of normal-less PCD files"),
    ("angle_thresh_deg", "15", "deg, region-growing normal tolerance"),
    ("min_segment_size", "15", "points, smaller segments are merged away"),
    ("adjacency_radius_m", "2 x spacing", "m, segment adjacency and region-growing radius"),
    ("border_radius_m", "3 x spacing", "m, border region for merge decisions"),
    ("theta", "0.3", "merge threshold on (1 - cos)/2, in [0, 1]"),
    ("fpfh_radius_m", "2.5 x spacing", "m, FPFH neighborhood radius"),
    ("bins_per_angle", "11", "FPFH histogram bins per angle"),
    ("n_levels", "4", "dictionary levels = hierarchies in the ensemble"),
    ("kmeans_restarts", "5", "2-means restarts per dictionary split"),
    ("sigma", "0.025", "kernel bandwidth on the Jensen-Shannon divergence"),
    ("match_aggregation", "max", "combining several matches: max, first or mean"),
    ("max_prototypes_per_vertex_per_label", "0", "prototype reservoir size, 0 = unlimited"),
    ("max_propagation_nodes", "4096", "segment sets propagated per level and instance"),
    ("max_embeddings", "100000", "embeddings enumerated per motif and query"),
    ("reject_threshold", "0.30", "minimum winning score, in [0, 1]"),
    ("stimulus_variant", "literal", "stimulus export: literal or unnormalized"),
    ("ratio", "0.75", "training fraction per label, in (0, 1)"),
    ("seed", "7", "seed for data generation, splits and k-means"),
    ("repeats", "1", "evaluation repeats with seeds seed, seed+1, ..."),
    ("per_label", "50", "scans per label in the synthetic corpus"),
];

impl Config {
    /// Defaults, then the optional TOML file, then `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.display().to_string(),
                    source,
                })?;
                text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| ConfigError::BadOverride(item.clone()))?;
            let (key, raw) = (key.trim(), raw.trim());
            if key.is_empty() {
                return Err(ConfigError::BadOverride(item.clone()));
            }
            table.insert(key.to_string(), parse_value(raw));
        }
        let config: Config = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, key: &'static str, value: impl ToString, expected: &'static str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    key,
                    value: value.to_string(),
                    expected,
                })
            }
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        check(positive(self.sample_spacing_m), "sample_spacing_m", self.sample_spacing_m, "> 0")?;
        check(self.noise_ratio.is_finite() && self.noise_ratio >= 0.0, "noise_ratio", self.noise_ratio, ">= 0")?;
        check(self.normal_k >= 3, "normal_k", self.normal_k, ">= 3")?;
        check(
            self.angle_thresh_deg > 0.0 && self.angle_thresh_deg < 180.0,
            "angle_thresh_deg",
            self.angle_thresh_deg,
            "in (0, 180)",
        )?;
        for (key, v) in [
            ("adjacency_radius_m", self.adjacency_radius_m),
            ("border_radius_m", self.border_radius_m),
            ("fpfh_radius_m", self.fpfh_radius_m),
        ] {
            if let Some(v) = v {
                check(positive(v), key, v, "> 0")?;
            }
        }
        check((0.0..=1.0).contains(&self.theta), "theta", self.theta, "in [0, 1]")?;
        check(self.bins_per_angle >= 1, "bins_per_angle", self.bins_per_angle, ">= 1")?;
        check((1..=16).contains(&self.n_levels), "n_levels", self.n_levels, "in 1..=16")?;
        check(self.kmeans_restarts >= 1, "kmeans_restarts", self.kmeans_restarts, ">= 1")?;
        check(positive(self.sigma), "sigma", self.sigma, "> 0")?;
        check(self.max_propagation_nodes >= 1, "max_propagation_nodes", self.max_propagation_nodes, ">= 1")?;
        check(self.max_embeddings >= 1, "max_embeddings", self.max_embeddings, ">= 1")?;
        check(
            (0.0..=1.0).contains(&self.reject_threshold),
            "reject_threshold",
            self.reject_threshold,
            "in [0, 1]",
        )?;
        check(self.ratio > 0.0 && self.ratio < 1.0, "ratio", self.ratio, "in (0, 1)")?;
        check(self.repeats >= 1, "repeats", self.repeats, ">= 1")?;
        check(self.per_label >= 1, "per_label", self.per_label, ">= 1")?;
        Ok(())
    }

    pub fn adjacency_radius(&self) -> f64 {
        self.adjacency_radius_m.unwrap_or(2.0 * self.sample_spacing_m)
    }

    pub fn border_radius(&self) -> f64 {
        self.border_radius_m.unwrap_or(3.0 * self.sample_spacing_m)
    }

    pub fn fpfh_radius(&self) -> f64 {
        self.fpfh_radius_m.unwrap_or(2.5 * self.sample_spacing_m)
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_ratio * self.sample_spacing_m
    }

    pub fn pipeline(&self) -> PipelineParams {
        PipelineParams {
            oversegment: OversegmentParams {
                angle_thresh_deg: self.angle_thresh_deg,
                min_size: self.min_segment_size,
                neighbor_radius: self.adjacency_radius(),
            },
            adjacency_radius: self.adjacency_radius(),
            border_radius: self.border_radius(),
            theta: self.theta,
            fpfh: FpfhParams {
                radius: self.fpfh_radius(),
                bins_per_angle: self.bins_per_angle,
            },
        }
    }

    pub fn ensemble(&self) -> EnsembleParams {
        EnsembleParams {
            hierarchy: HierarchyParams {
                sigma: self.sigma,
                aggregation: self.match_aggregation,
                max_prototypes_per_vertex_per_label: self.max_prototypes_per_vertex_per_label,
                max_propagation_nodes: self.max_propagation_nodes,
                max_embeddings: self.max_embeddings,
                seed: self.seed,
            },
            reject_threshold: self.reject_threshold,
            stimulus_variant: self.stimulus_variant,
        }
    }

    pub fn experiment(&self, baseline: bool) -> ExperimentParams {
        ExperimentParams {
            pipeline: self.pipeline(),
            n_levels: self.n_levels,
            kmeans_restarts: self.kmeans_restarts,
            ensemble: self.ensemble(),
            ratio: self.ratio,
            seed: self.seed,
            repeats: self.repeats,
            baseline,
        }
    }

    pub fn benchmark(&self) -> BenchmarkParams {
        BenchmarkParams {
            per_label: self.per_label,
            sample_spacing: self.sample_spacing_m,
            noise_ratio: self.noise_ratio,
            seed: self.seed,
        }
    }
}

/// TOML value if `raw` parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
