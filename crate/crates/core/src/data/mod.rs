//! Labelled feature matrices, synthetic imbalanced data, and group metrics.

mod csv;
mod metrics;
mod split;
mod synth;

pub use self::csv::{load_csv, parse_csv, write_csv};
pub use metrics::{group_accuracy, majority_class, EpochRecord, GroupAccuracy, RunMetrics};
pub use split::stratified_split;
pub use synth::{synth_imbalanced, SynthConfig, HAM10000_LIKE_WEIGHTS};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major `N x dim` features with labels in `[0, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    features: Vec<F>,
    dim: usize,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(features: Vec<F>, dim: usize, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "feature dimension must be positive"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                found: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features", "non-finite feature value"));
        }
        let mut class_counts = vec![0; num_classes];
        for &y in &labels {
            if y >= num_classes {
                return Err(Error::invalid(
                    "labels",
                    format!("label {y} outside [0, {num_classes})"),
                ));
            }
            class_counts[y] += 1;
        }
        Ok(Dataset {
            features,
            dim,
            labels,
            class_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn features(&self) -> &[F] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows `indices` in the given order, keeping the class count `K`.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        let mut class_counts = vec![0; self.num_classes()];
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            class_counts[self.labels[i]] += 1;
        }
        Dataset {
            features,
            dim: self.dim,
            labels,
            class_counts,
        }
    }

    /// Gathers `indices` into a contiguous feature block and label list.
    pub fn gather(&self, indices: &[usize]) -> (Vec<F>, Vec<usize>) {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        (features, labels)
    }
}
