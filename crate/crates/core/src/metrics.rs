//! Confusion matrix and accuracy / precision / recall / F1, per class and
//! macro-averaged (unweighted mean over classes).

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `counts[t * k + p]` = samples of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if k < 2 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::input("confusion matrix must be square with at least 2 classes"));
        }
        Ok(ConfusionMatrix {
            num_classes: k,
            counts: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.num_classes + predicted]
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k * self.num_classes..(k + 1) * self.num_classes]
            .iter()
            .sum()
    }

    pub fn column_sum(&self, k: usize) -> u64 {
        (0..self.num_classes).map(|t| self.get(t, k)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|k| self.get(k, k)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.num_classes).map(|r| r.to_vec()).collect()
    }
}

pub fn confusion(true_labels: &[usize], predicted: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if num_classes < 2 {
        return Err(Error::input("need at least 2 classes"));
    }
    if true_labels.is_empty() {
        return Err(Error::input("no samples to evaluate"));
    }
    if true_labels.len() != predicted.len() {
        return Err(Error::input(alloc::format!(
            "{} true labels but {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    let mut counts = alloc::vec![0u64; num_classes * num_classes];
    for (i, (&t, &p)) in true_labels.iter().zip(predicted).enumerate() {
        if t >= num_classes || p >= num_classes {
            return Err(Error::input(alloc::format!(
                "sample {i}: label pair ({t}, {p}) out of range for {num_classes} classes"
            )));
        }
        counts[t * num_classes + p] += 1;
    }
    Ok(ConfusionMatrix { num_classes, counts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of samples whose true class is this one.
    pub support: u64,
    /// Nothing was predicted as this class; precision reported as 0.
    pub precision_undefined: bool,
    /// The class has no samples; recall reported as 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

pub(crate) fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn report(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::input("confusion matrix is empty"));
    }
    let per_class: Vec<ClassMetrics> = (0..cm.num_classes())
        .map(|k| {
            let hit = cm.get(k, k) as f64;
            let predicted = cm.column_sum(k);
            let support = cm.row_sum(k);
            let precision = if predicted > 0 { hit / predicted as f64 } else { 0.0 };
            let recall = if support > 0 { hit / support as f64 } else { 0.0 };
            ClassMetrics {
                precision,
                recall,
                f1: f1_score(precision, recall),
                support,
                precision_undefined: predicted == 0,
                recall_undefined: support == 0,
            }
        })
        .collect();
    let k = per_class.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k;
    Ok(MetricsReport {
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        per_class,
    })
}

pub fn evaluate(true_labels: &[usize], predicted: &[usize], num_classes: usize) -> Result<MetricsReport> {
    report(&confusion(true_labels, predicted, num_classes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn confusion_worked_example() {
        let cm = confusion(&[0, 1, 0], &[0, 1, 1], 2).unwrap();
        assert_eq!(cm.rows(), vec![vec![1, 1], vec![0, 1]]);
    }

    #[test]
    fn perfect_is_diagonal() {
        let y = [0, 1, 2, 2, 1];
        let cm = confusion(&y, &y, 3).unwrap();
        for t in 0..3 {
            for p in 0..3 {
                assert_eq!(cm.get(t, p) > 0, t == p);
            }
        }
        let r = report(&cm).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!((r.macro_precision, r.macro_recall, r.macro_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn report_worked_example() {
        let cm = ConfusionMatrix::from_counts(&[vec![1, 1], vec![0, 1]]).unwrap();
        let r = report(&cm).unwrap();
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class[0].precision, 1.0);
        assert_eq!(r.per_class[1].precision, 0.5);
        assert_eq!(r.per_class[0].recall, 0.5);
        assert_eq!(r.per_class[1].recall, 1.0);
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.per_class[1].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_predictor() {
        let r = evaluate(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.per_class[1].recall, 0.0);
        assert!(r.per_class[1].precision_undefined);
        assert!(!r.per_class[1].recall_undefined);
    }

    #[test]
    fn errors() {
        assert!(confusion(&[], &[], 2).is_err());
        assert!(confusion(&[0, 2], &[0, 1], 2).is_err());
        assert!(confusion(&[0], &[0, 1], 2).is_err());
    }
}
