//! Datasets, train/test splits, classification metrics, the FPFH
//! nearest-neighbor baseline and repeated experiments.

mod baseline;
mod dataset;
mod experiment;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{decide, Ensemble, EnsembleError};
use crate::geometry::GeometryError;
use crate::pipeline::PipelineError;
use crate::segmentation::InstanceGraph;

pub use baseline::{fpfh_nn_baseline, FpfhBaseline};
pub use dataset::{
    load_dataset, random_scan, random_shape, save_dataset, split, synthetic_benchmark, BenchmarkParams, LabeledDataset,
    LabeledInstance, Provenance,
};
pub use experiment::{
    prepare_dataset, run_baseline_experiment, run_experiment, run_repeat, stimuli_csv, BaselineOutcome, BaselineRepeat,
    BaselineReport, ExperimentParams, ExperimentReport, ExperimentSummary, PreparedInstance, RepeatReport,
};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("label `{0}` has no instances")]
    EmptyCategory(String),
    #[error("no .pcd files under {0}")]
    EmptyDataset(PathBuf),
    #[error("instance id `{0}` occurs twice")]
    DuplicateId(String),
    #[error("label `{0}` is not declared")]
    UnknownLabel(String),
    #[error("split ratio must be in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("query has no descriptions")]
    EmptyQuery,
    #[error("{path}: {source}")]
    Instance { path: PathBuf, source: GeometryError },
    #[error("instance `{id}`: {source}")]
    Pipeline { id: String, source: PipelineError },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Dictionary(#[from] crate::dictionary::DictionaryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rows are true labels; columns are predicted labels plus a final
/// "rejected" column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn total(&self) -> usize {
        self.row_sums().iter().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Misclassified or rejected over total; 0 for an empty matrix.
    pub fn error(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (total - self.correct()) as f64 / total as f64
    }
}

/// One classifier decision: true label, predicted label (`None` when
/// rejected) and per-label scores, higher is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub truth: usize,
    pub predicted: Option<usize>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    pub error: f64,
    /// `ranked[y][k]`: fraction of label-`y` instances whose true label is
    /// at rank `k + 1` of the sorted scores. Rejected instances count
    /// towards no rank.
    pub ranked: Vec<Vec<f64>>,
}

/// 1-based rank of `truth` in `scores` sorted descending, ties broken by
/// lower label index.
pub fn rank_of(truth: usize, scores: &[f64]) -> usize {
    let s = scores[truth];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &x)| x > s || (x == s && j < truth))
        .count()
}

pub fn metrics(labels: &[String], predictions: &[Prediction]) -> Metrics {
    let n = labels.len();
    let mut counts = vec![vec![0usize; n + 1]; n];
    let mut rank_counts = vec![vec![0usize; n]; n];
    for p in predictions {
        match p.predicted {
            Some(y) => {
                counts[p.truth][y] += 1;
                rank_counts[p.truth][rank_of(p.truth, &p.scores) - 1] += 1;
            }
            None => counts[p.truth][n] += 1,
        }
    }
    let confusion = ConfusionMatrix {
        labels: labels.to_vec(),
        counts,
    };
    let ranked = rank_counts
        .iter()
        .zip(confusion.row_sums())
        .map(|(row, total)| {
            row.iter()
                .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                .collect()
        })
        .collect();
    Metrics {
        error: confusion.error(),
        confusion,
        ranked,
    }
}

/// Outcome for one test instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub id: String,
    pub true_label: String,
    pub predicted: Option<String>,
    pub confidence: f64,
    pub scores: Vec<f64>,
    pub stimuli: Vec<f64>,
    /// Decision of each hierarchy alone.
    pub hierarchy_predicted: Vec<Option<String>>,
    pub baseline_predicted: Option<String>,
    pub baseline_distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub labels: Vec<String>,
    pub ensemble: Metrics,
    /// Metrics of each hierarchy used alone, by description level.
    pub hierarchies: Vec<Metrics>,
    pub baseline: Option<Metrics>,
    pub instances: Vec<InstanceOutcome>,
}

/// Classifies every test instance with the ensemble, each of its
/// hierarchies alone and, if given, the FPFH baseline.
pub fn evaluate(
    ensemble: &Ensemble,
    test: &[&PreparedInstance],
    baseline: Option<&FpfhBaseline>,
) -> Result<EvaluationReport, EvaluationError> {
    let labels = &ensemble.labels;
    let n = labels.len();
    let rows = test
        .par_iter()
        .map(|inst| evaluate_one(ensemble, inst, baseline))
        .collect::<Result<Vec<_>, EvaluationError>>()?;

    let ensemble_predictions: Vec<Prediction> = rows.iter().map(|r| r.ensemble.clone()).collect();
    let hierarchies = (0..ensemble.hierarchies.len())
        .map(|h| {
            let preds: Vec<Prediction> = rows.iter().map(|r| r.hierarchies[h].clone()).collect();
            metrics(labels, &preds)
        })
        .collect();
    let baseline_metrics = baseline.map(|_| {
        let preds: Vec<Prediction> = rows.iter().filter_map(|r| r.baseline.clone()).collect();
        metrics(labels, &preds)
    });
    let name = |y: Option<usize>| y.map(|y| labels[y].clone());
    let instances = rows
        .iter()
        .zip(test)
        .map(|(r, inst)| InstanceOutcome {
            id: inst.id.clone(),
            true_label: labels[inst.label].clone(),
            predicted: name(r.ensemble.predicted),
            confidence: r.confidence,
            scores: r.ensemble.scores.clone(),
            stimuli: r.stimuli.clone(),
            hierarchy_predicted: r.hierarchies.iter().map(|p| name(p.predicted)).collect(),
            baseline_predicted: r.baseline.as_ref().and_then(|p| name(p.predicted)),
            baseline_distances: r.baseline_distances.clone(),
        })
        .collect();
    debug_assert!(rows.iter().all(|r| r.ensemble.scores.len() == n));
    Ok(EvaluationReport {
        labels: labels.clone(),
        ensemble: metrics(labels, &ensemble_predictions),
        hierarchies,
        baseline: baseline_metrics,
        instances,
    })
}

struct Row {
    ensemble: Prediction,
    confidence: f64,
    stimuli: Vec<f64>,
    hierarchies: Vec<Prediction>,
    baseline: Option<Prediction>,
    baseline_distances: Vec<f64>,
}

fn evaluate_one(ensemble: &Ensemble, inst: &PreparedInstance, baseline: Option<&FpfhBaseline>) -> Result<Row, EvaluationError> {
    let n = ensemble.n_labels();
    let responses = ensemble.responses(&inst.graph)?;
    let result = ensemble.classify_responses(&responses);
    let hierarchies = responses
        .iter()
        .map(|r| {
            let single = decide(vec![r.gamma.clone()], n, ensemble.reject_threshold);
            Prediction {
                truth: inst.label,
                predicted: single.label,
                scores: single.scores,
            }
        })
        .collect();
    let (baseline, baseline_distances) = match baseline {
        Some(b) => {
            let (y, d) = b.predict(&segment_descriptions(&inst.graph))?;
            let scores = d.iter().map(|x| -x).collect();
            (
                Some(Prediction {
                    truth: inst.label,
                    predicted: Some(y),
                    scores,
                }),
                d,
            )
        }
        None => (None, Vec::new()),
    };
    Ok(Row {
        stimuli: ensemble.stimuli_responses(&responses),
        confidence: result.confidence,
        ensemble: Prediction {
            truth: inst.label,
            predicted: result.label,
            scores: result.scores,
        },
        hierarchies,
        baseline,
        baseline_distances,
    })
}

pub(crate) fn segment_descriptions(graph: &InstanceGraph) -> Vec<&[f64]> {
    graph
        .vertices()
        .iter()
        .filter_map(|v| v.description.as_ref().map(|d| d.bins()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<String> {
        vec!["a".into(), "b".into(), "c".into()]
    }

    fn p(truth: usize, predicted: Option<usize>, scores: &[f64]) -> Prediction {
        Prediction {
            truth,
            predicted,
            scores: scores.to_vec(),
        }
    }

    #[test]
    fn all_correct() {
        let preds = vec![p(0, Some(0), &[0.8, 0.1, 0.1]), p(1, Some(1), &[0.2, 0.7, 0.1])];
        let m = metrics(&labels(), &preds);
        assert_eq!(m.error, 0.0);
        assert_eq!(m.ranked[0][0], 1.0);
        assert_eq!(m.ranked[1][0], 1.0);
        assert_eq!(m.ranked[2], vec![0.0; 3]);
    }

    #[test]
    fn ranks_and_rejections() {
        let preds = vec![
            p(0, Some(1), &[0.3, 0.5, 0.2]),
            p(0, Some(1), &[0.1, 0.5, 0.4]),
            p(0, None, &[0.0, 0.0, 0.0]),
            p(0, Some(0), &[0.6, 0.2, 0.2]),
            p(2, Some(0), &[0.4, 0.2, 0.4]),
        ];
        let m = metrics(&labels(), &preds);
        assert_eq!(m.confusion.counts[0], vec![1, 2, 0, 1]);
        assert_eq!(m.confusion.row_sums(), vec![4, 0, 1]);
        assert_eq!(m.ranked[0], vec![0.25, 0.25, 0.25]);
        // Tie with a lower label index ranks below it.
        assert_eq!(m.ranked[2], vec![0.0, 1.0, 0.0]);
        assert!((m.error - 4.0 / 5.0).abs() < 1e-12);
        for row in &m.ranked {
            assert!(row.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn rank_rule() {
        assert_eq!(rank_of(2, &[0.1, 0.2, 0.7]), 1);
        assert_eq!(rank_of(0, &[0.1, 0.2, 0.7]), 3);
        assert_eq!(rank_of(1, &[0.5, 0.5, 0.0]), 2);
        assert_eq!(rank_of(0, &[0.5, 0.5, 0.0]), 1);
    }
}
