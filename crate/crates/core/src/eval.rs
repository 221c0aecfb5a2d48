//! Confusion matrices, per-class precision/recall/F1, and precision-recall
//! curves. `Related` is the positive class throughout.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(predictions: &[Label], truths: &[Label]) -> Result<ConfusionMatrix> {
    if predictions.len() != truths.len() {
        bail!(
            Data,
            "{} predictions for {} labels",
            predictions.len(),
            truths.len()
        );
    }
    if predictions.is_empty() {
        bail!(Data, "confusion matrix of zero examples");
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in predictions.iter().zip(truths) {
        match (p, t) {
            (Label::Related, Label::Related) => cm.tp += 1,
            (Label::Related, Label::Unrelated) => cm.fp += 1,
            (Label::Unrelated, Label::Related) => cm.fn_ += 1,
            (Label::Unrelated, Label::Unrelated) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Precision, recall and F1 of one class. `degenerate` is set when a
/// denominator was zero and the affected value was defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `Related` first, then `Unrelated`.
    pub classes: [ClassMetrics; 2],
    pub accuracy: f64,
    pub macro_f1: f64,
}

impl Metrics {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        &self.classes[if label == Label::Related { 0 } else { 1 }]
    }
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn class_metrics(label: Label, tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let (precision, dp) = ratio(tp, tp + fp);
    let (recall, dr) = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ClassMetrics {
        label,
        precision,
        recall,
        f1,
        support: tp + fn_,
        degenerate: dp || dr,
    }
}

pub fn precision_recall_f1(cm: &ConfusionMatrix) -> Metrics {
    let related = class_metrics(Label::Related, cm.tp, cm.fp, cm.fn_);
    let unrelated = class_metrics(Label::Unrelated, cm.tn, cm.fn_, cm.fp);
    let accuracy = if cm.total() == 0 {
        0.0
    } else {
        (cm.tp + cm.tn) as f64 / cm.total() as f64
    };
    Metrics {
        macro_f1: (related.f1 + unrelated.f1) / 2.0,
        classes: [related, unrelated],
        accuracy,
    }
}

/// Evaluation summary of a classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub train_loss: Option<f64>,
    pub test_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// `(recall, precision)` after each distinct threshold, highest score first.
    pub points: Vec<(f64, f64)>,
    pub average_precision: f64,
}

/// Sweeps the threshold down through every distinct score. Tied scores are
/// admitted together. AP is `sum P(k) * (R(k) - R(k-1))`.
pub fn pr_curve(scores: &[f64], truths: &[Label]) -> Result<PrCurve> {
    if scores.len() != truths.len() {
        bail!(Data, "{} scores for {} labels", scores.len(), truths.len());
    }
    if scores.iter().any(|s| !s.is_finite()) {
        bail!(Data, "non-finite score");
    }
    let positives = truths.iter().filter(|&&t| t == Label::Related).count();
    if positives == 0 {
        bail!(
            Data,
            "precision-recall curve needs at least one Related example"
        );
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truths[order[i]] == Label::Related {
                tp += 1;
            }
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        ap += precision * (recall - prev_recall);
        prev_recall = recall;
        points.push((recall, precision));
    }
    Ok(PrCurve {
        points,
        average_precision: ap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Related as R, Unrelated as U};

    #[test]
    fn confusion_example() {
        let cm = confusion(&[R, R, U, U], &[R, U, R, U]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
        assert!(confusion(&[], &[]).is_err());
        assert!(confusion(&[R], &[R, U]).is_err());
    }

    #[test]
    fn metrics_example() {
        let m = precision_recall_f1(&ConfusionMatrix {
            tp: 3,
            fp: 1,
            fn_: 1,
            tn: 5,
        });
        let r = m.class(R);
        assert_eq!((r.precision, r.recall, r.f1), (0.75, 0.75, 0.75));
        assert_eq!(m.accuracy, 0.8);
        assert!(!r.degenerate);
    }

    #[test]
    fn no_predicted_positives_is_flagged() {
        let m = precision_recall_f1(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            fn_: 4,
            tn: 6,
        });
        assert_eq!(m.class(R).precision, 0.0);
        assert!(m.class(R).degenerate);
        assert!(!m.class(U).degenerate);
    }

    #[test]
    fn ap_example() {
        let c = pr_curve(&[0.9, 0.8, 0.7, 0.6], &[R, R, U, R]).unwrap();
        assert!((c.average_precision - 11.0 / 12.0).abs() < 1e-12);
        let perfect = pr_curve(&[0.9, 0.8, 0.2, 0.1], &[R, R, U, U]).unwrap();
        assert_eq!(perfect.average_precision, 1.0);
        assert!(pr_curve(&[0.5], &[U]).is_err());
    }

    #[test]
    fn ties_share_a_threshold() {
        let c = pr_curve(&[0.5, 0.5, 0.5], &[R, U, R]).unwrap();
        assert_eq!(c.points, alloc::vec![(1.0, 2.0 / 3.0)]);
    }
}
