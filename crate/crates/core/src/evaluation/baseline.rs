use super::EvaluationError;

/// Nearest-neighbor classifier over labeled segment descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct FpfhBaseline {
    n_labels: usize,
    /// Training descriptions grouped by label index.
    by_label: Vec<Vec<Vec<f64>>>,
}

impl FpfhBaseline {
    pub fn new(labels: &[String], descriptions: impl IntoIterator<Item = (usize, Vec<f64>)>) -> Result<Self, EvaluationError> {
        let mut by_label = vec![Vec::new(); labels.len()];
        for (y, d) in descriptions {
            by_label[y].push(d);
        }
        if let Some(y) = by_label.iter().position(Vec::is_empty) {
            return Err(EvaluationError::EmptyCategory(labels[y].clone()));
        }
        Ok(Self {
            n_labels: labels.len(),
            by_label,
        })
    }

    /// Per label, the mean over query descriptions of the Euclidean
    /// distance to the nearest training description of that label.
    pub fn distances(&self, query: &[&[f64]]) -> Result<Vec<f64>, EvaluationError> {
        if query.is_empty() {
            return Err(EvaluationError::EmptyQuery);
        }
        Ok(self
            .by_label
            .iter()
            .map(|train| {
                let total: f64 = query
                    .iter()
                    .map(|q| {
                        train
                            .iter()
                            .map(|t| euclidean(q, t))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .sum();
                total / query.len() as f64
            })
            .collect())
    }

    /// Label with the smallest mean distance (ties to the lower index).
    pub fn predict(&self, query: &[&[f64]]) -> Result<(usize, Vec<f64>), EvaluationError> {
        let d = self.distances(query)?;
        let mut best = 0;
        for y in 1..self.n_labels {
            if d[y] < d[best] {
                best = y;
            }
        }
        Ok((best, d))
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Single-call form of [`FpfhBaseline::predict`].
pub fn fpfh_nn_baseline(
    labels: &[String],
    train: &[(usize, Vec<f64>)],
    query: &[&[f64]],
) -> Result<usize, EvaluationError> {
    FpfhBaseline::new(labels, train.iter().cloned())?.predict(query).map(|(y, _)| y)
}
