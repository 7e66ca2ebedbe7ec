use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy overall, per class, and for the majority/minority partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub overall: f64,
    /// Classes with no samples report 0.
    pub per_class: Vec<f64>,
    /// Accuracy on the most frequent class.
    pub majority: f64,
    /// Accuracy on every other class pooled (0 if there are none).
    pub minority: f64,
}

/// Most frequent class; ties go to the lowest index.
pub fn majority_class(class_counts: &[usize]) -> Option<usize> {
    class_counts
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, usize)>, (i, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((i, c)),
        })
        .map(|(i, _)| i)
}

/// `class_counts` decides which class is the majority (usually the training
/// distribution); accuracies are computed over `predictions` vs `labels`.
pub fn group_accuracy(predictions: &[usize], labels: &[usize], class_counts: &[usize]) -> Result<GroupAccuracy> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty("no predictions to score"));
    }
    let k = class_counts.len();
    let majority = majority_class(class_counts).ok_or(Error::Empty("class counts"))?;

    let mut seen = vec![0usize; k];
    let mut hits = vec![0usize; k];
    for (&p, &y) in predictions.iter().zip(labels) {
        if y >= k {
            return Err(Error::invalid("labels", format!("label {y} outside [0, {k})")));
        }
        seen[y] += 1;
        if p == y {
            hits[y] += 1;
        }
    }
    let ratio = |h: usize, n: usize| if n == 0 { 0.0 } else { h as f64 / n as f64 };

    let total_hits: usize = hits.iter().sum();
    let minority_seen = labels.len() - seen[majority];
    let minority_hits = total_hits - hits[majority];
    Ok(GroupAccuracy {
        overall: ratio(total_hits, labels.len()),
        per_class: hits.iter().zip(&seen).map(|(&h, &n)| ratio(h, n)).collect(),
        majority: ratio(hits[majority], seen[majority]),
        minority: ratio(minority_hits, minority_seen),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub accuracy: GroupAccuracy,
    /// Cumulative epsilon after this epoch's last iteration.
    pub epsilon: f64,
}

/// Per-epoch history of a training run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub epochs: Vec<EpochRecord>,
    /// Set when clipping thresholds were estimated from raw gradient norms,
    /// which the accountant does not charge for.
    pub privacy_caveat: bool,
}

impl RunMetrics {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// `epoch,overall,maj,min,eps,class_0..class_{K-1}`.
    pub fn to_csv(&self) -> String {
        let k = self.epochs.first().map_or(0, |e| e.accuracy.per_class.len());
        let mut out = String::from("epoch,overall,maj,min,eps");
        for c in 0..k {
            out.push_str(&format!(",class_{c}"));
        }
        out.push('\n');
        for rec in &self.epochs {
            let a = &rec.accuracy;
            out.push_str(&format!(
                "{},{},{},{},{}",
                rec.epoch, a.overall, a.majority, a.minority, rec.epsilon
            ));
            for v in &a.per_class {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}
