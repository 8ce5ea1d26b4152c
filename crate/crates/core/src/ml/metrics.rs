//! Multi-label evaluation metrics.

use serde::{Deserialize, Serialize};

use super::MlError;
use crate::labels::{Label, LabelSet, LABEL_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_label: Vec<LabelMetrics>,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub subset_accuracy: f64,
    pub hamming_loss: f64,
}

impl Metrics {
    pub fn label(&self, l: Label) -> &LabelMetrics {
        &self.per_label[l.index()]
    }

    /// Every scalar in a fixed order: per-label P, R, F1, then macro-F1,
    /// micro-F1, subset accuracy and Hamming loss.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .per_label
            .iter()
            .flat_map(|m| [m.precision, m.recall, m.f1])
            .collect();
        v.extend([
            self.macro_f1,
            self.micro_f1,
            self.subset_accuracy,
            self.hamming_loss,
        ]);
        v
    }

    /// Inverse of [`Metrics::to_vec`].
    pub fn from_vec(v: &[f64]) -> Metrics {
        let per_label = Label::ALL
            .iter()
            .map(|l| {
                let i = 3 * l.index();
                LabelMetrics {
                    label: *l,
                    precision: v[i],
                    recall: v[i + 1],
                    f1: v[i + 2],
                }
            })
            .collect();
        let o = 3 * LABEL_COUNT;
        Metrics {
            per_label,
            macro_f1: v[o],
            micro_f1: v[o + 1],
            subset_accuracy: v[o + 2],
            hamming_loss: v[o + 3],
        }
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-label precision/recall/F1, macro-F1 over labels with at least one gold
/// positive, micro-F1 over pooled counts, subset accuracy and Hamming loss.
/// When no label has a gold positive, macro-F1 equals micro-F1; when there
/// are no positives at all in either list, micro-F1 is 1.
pub fn evaluate_metrics(pred: &[LabelSet], gold: &[LabelSet]) -> Result<Metrics, MlError> {
    if pred.len() != gold.len() {
        return Err(MlError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(MlError::NoInstances);
    }
    let mut tp = [0usize; LABEL_COUNT];
    let mut fp = [0usize; LABEL_COUNT];
    let mut fn_ = [0usize; LABEL_COUNT];
    let mut exact = 0;
    let mut wrong_bits = 0;
    for (p, g) in pred.iter().zip(gold) {
        if p == g {
            exact += 1;
        }
        for l in Label::ALL {
            match (p.contains(l), g.contains(l)) {
                (true, true) => tp[l.index()] += 1,
                (true, false) => fp[l.index()] += 1,
                (false, true) => fn_[l.index()] += 1,
                (false, false) => {}
            }
        }
        wrong_bits += (p.bits() ^ g.bits()).count_ones() as usize;
    }
    let per_label: Vec<LabelMetrics> = Label::ALL
        .iter()
        .map(|l| {
            let i = l.index();
            let precision = ratio(tp[i], tp[i] + fp[i]);
            let recall = ratio(tp[i], tp[i] + fn_[i]);
            LabelMetrics {
                label: *l,
                precision,
                recall,
                f1: f1_score(precision, recall),
            }
        })
        .collect();
    let (stp, sfp, sfn) = (
        tp.iter().sum::<usize>(),
        fp.iter().sum::<usize>(),
        fn_.iter().sum::<usize>(),
    );
    let micro_f1 = if stp + sfp + sfn == 0 {
        1.0
    } else {
        f1_score(ratio(stp, stp + sfp), ratio(stp, stp + sfn))
    };
    let eligible: Vec<f64> = per_label
        .iter()
        .filter(|m| tp[m.label.index()] + fn_[m.label.index()] > 0)
        .map(|m| m.f1)
        .collect();
    let macro_f1 = if eligible.is_empty() {
        micro_f1
    } else {
        eligible.iter().sum::<f64>() / eligible.len() as f64
    };
    Ok(Metrics {
        per_label,
        macro_f1,
        micro_f1,
        subset_accuracy: exact as f64 / pred.len() as f64,
        hamming_loss: wrong_bits as f64 / (pred.len() * LABEL_COUNT) as f64,
    })
}
