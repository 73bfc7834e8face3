use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    evaluate, metrics, segment_descriptions, split, EvaluationError, EvaluationReport, FpfhBaseline, LabeledDataset, Metrics,
    Prediction,
};
use crate::dictionary::{train_dictionary, DictionaryParams};
use crate::ensemble::{train_ensemble, Ensemble, EnsembleParams};
use crate::pipeline::{prepare_instance, PipelineParams};
use crate::segmentation::InstanceGraph;

/// A dataset instance after segmentation and description.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedInstance {
    pub id: String,
    /// Index into the dataset's labels.
    pub label: usize,
    pub graph: InstanceGraph,
}

pub fn prepare_dataset(dataset: &LabeledDataset, params: &PipelineParams) -> Result<Vec<PreparedInstance>, EvaluationError> {
    dataset
        .instances
        .par_iter()
        .map(|inst| {
            let graph = prepare_instance(&inst.cloud, params).map_err(|source| EvaluationError::Pipeline {
                id: inst.id.clone(),
                source,
            })?;
            Ok(PreparedInstance {
                id: inst.id.clone(),
                label: dataset.label_index(&inst.label).expect("validated label"),
                graph,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentParams {
    pub pipeline: PipelineParams,
    pub n_levels: u32,
    pub kmeans_restarts: usize,
    pub ensemble: EnsembleParams,
    pub ratio: f64,
    /// Seed of the first repeat; repeat `r` uses `seed + r`.
    pub seed: u64,
    pub repeats: usize,
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatReport {
    pub seed: u64,
    pub train_count: usize,
    pub test_count: usize,
    /// Words per dictionary level.
    pub dictionary_words: Vec<usize>,
    /// `(vertices, edges)` per motif level, per hierarchy.
    pub hierarchy_sizes: Vec<Vec<(usize, usize)>>,
    pub evaluation: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub ensemble_error: f64,
    pub hierarchy_errors: Vec<f64>,
    pub baseline_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub labels: Vec<String>,
    pub ratio: f64,
    pub seed: u64,
    pub repeats: Vec<RepeatReport>,
    /// Means over repeats.
    pub summary: ExperimentSummary,
}

/// Split, dictionary, ensemble and evaluation for one seed.
pub fn run_repeat(
    labels: &[String],
    prepared: &[PreparedInstance],
    dataset: &LabeledDataset,
    params: &ExperimentParams,
    seed: u64,
) -> Result<(RepeatReport, Ensemble), EvaluationError> {
    let (train_idx, test_idx) = split(dataset, params.ratio, seed)?;
    let train: Vec<&PreparedInstance> = train_idx.iter().map(|&i| &prepared[i]).collect();
    let test: Vec<&PreparedInstance> = test_idx.iter().map(|&i| &prepared[i]).collect();

    let descriptions: Vec<&[f64]> = train.iter().flat_map(|p| segment_descriptions(&p.graph)).collect();
    let dictionary = train_dictionary(
        &descriptions,
        DictionaryParams {
            n_levels: params.n_levels,
            kmeans_restarts: params.kmeans_restarts,
            seed,
        },
    )?;
    let dictionary_words = dictionary.word_counts();
    let mut ensemble_params = params.ensemble;
    ensemble_params.hierarchy.seed = seed;
    let instances: Vec<(&InstanceGraph, &str)> = train.iter().map(|p| (&p.graph, labels[p.label].as_str())).collect();
    let ensemble = train_ensemble(&instances, labels.to_vec(), dictionary, ensemble_params)?;

    let baseline = if params.baseline {
        Some(FpfhBaseline::new(
            labels,
            train
                .iter()
                .flat_map(|p| segment_descriptions(&p.graph).into_iter().map(|d| (p.label, d.to_vec()))),
        )?)
    } else {
        None
    };
    let evaluation = evaluate(&ensemble, &test, baseline.as_ref())?;
    Ok((
        RepeatReport {
            seed,
            train_count: train.len(),
            test_count: test.len(),
            dictionary_words,
            hierarchy_sizes: ensemble.hierarchies.iter().map(|h| h.level_sizes()).collect(),
            evaluation,
        },
        ensemble,
    ))
}

/// Prepares the dataset once, then runs `params.repeats` seeded repeats.
pub fn run_experiment(dataset: &LabeledDataset, params: &ExperimentParams) -> Result<ExperimentReport, EvaluationError> {
    let prepared = prepare_dataset(dataset, &params.pipeline)?;
    let mut repeats = Vec::with_capacity(params.repeats);
    for r in 0..params.repeats.max(1) {
        let seed = params.seed.wrapping_add(r as u64);
        repeats.push(run_repeat(&dataset.labels, &prepared, dataset, params, seed)?.0);
    }
    Ok(ExperimentReport {
        labels: dataset.labels.clone(),
        ratio: params.ratio,
        seed: params.seed,
        summary: summarize(&repeats),
        repeats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub id: String,
    pub true_label: String,
    pub predicted: String,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRepeat {
    pub seed: u64,
    pub train_count: usize,
    pub test_count: usize,
    pub metrics: Metrics,
    pub instances: Vec<BaselineOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub labels: Vec<String>,
    pub ratio: f64,
    pub seed: u64,
    pub repeats: Vec<BaselineRepeat>,
    /// Mean error over repeats.
    pub error: f64,
}

/// The FPFH nearest-neighbor baseline alone, on the same splits as
/// [`run_experiment`].
pub fn run_baseline_experiment(dataset: &LabeledDataset, params: &ExperimentParams) -> Result<BaselineReport, EvaluationError> {
    let prepared = prepare_dataset(dataset, &params.pipeline)?;
    let labels = &dataset.labels;
    let mut repeats = Vec::with_capacity(params.repeats);
    for r in 0..params.repeats.max(1) {
        let seed = params.seed.wrapping_add(r as u64);
        let (train_idx, test_idx) = split(dataset, params.ratio, seed)?;
        let baseline = FpfhBaseline::new(
            labels,
            train_idx.iter().flat_map(|&i| {
                let p = &prepared[i];
                segment_descriptions(&p.graph).into_iter().map(move |d| (p.label, d.to_vec()))
            }),
        )?;
        let mut predictions = Vec::with_capacity(test_idx.len());
        let mut instances = Vec::with_capacity(test_idx.len());
        for &i in &test_idx {
            let p = &prepared[i];
            let (y, distances) = baseline.predict(&segment_descriptions(&p.graph))?;
            predictions.push(Prediction {
                truth: p.label,
                predicted: Some(y),
                scores: distances.iter().map(|d| -d).collect(),
            });
            instances.push(BaselineOutcome {
                id: p.id.clone(),
                true_label: labels[p.label].clone(),
                predicted: labels[y].clone(),
                distances,
            });
        }
        repeats.push(BaselineRepeat {
            seed,
            train_count: train_idx.len(),
            test_count: test_idx.len(),
            metrics: metrics(labels, &predictions),
            instances,
        });
    }
    let error = repeats.iter().map(|r| r.metrics.error).sum::<f64>() / repeats.len() as f64;
    Ok(BaselineReport {
        labels: labels.clone(),
        ratio: params.ratio,
        seed: params.seed,
        repeats,
        error,
    })
}

fn summarize(repeats: &[RepeatReport]) -> ExperimentSummary {
    let n = repeats.len().max(1) as f64;
    let mean = |f: &dyn Fn(&RepeatReport) -> f64| repeats.iter().map(f).sum::<f64>() / n;
    let levels = repeats.first().map_or(0, |r| r.evaluation.hierarchies.len());
    ExperimentSummary {
        ensemble_error: mean(&|r| r.evaluation.ensemble.error),
        hierarchy_errors: (0..levels)
            .map(|h| mean(&|r| r.evaluation.hierarchies[h].error))
            .collect(),
        baseline_error: repeats
            .iter()
            .all(|r| r.evaluation.baseline.is_some())
            .then(|| mean(&|r| r.evaluation.baseline.as_ref().map_or(0.0, |m| m.error))),
    }
}

/// CSV with columns `instance_id,true_label,r_<label>...`.
pub fn stimuli_csv<'a>(labels: &[String], rows: impl IntoIterator<Item = (&'a str, &'a str, &'a [f64])>) -> String {
    let mut out = String::from("instance_id,true_label");
    for l in labels {
        let _ = write!(out, ",r_{l}");
    }
    out.push('\n');
    for (id, label, r) in rows {
        out.push_str(id);
        out.push(',');
        out.push_str(label);
        for x in r {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}
