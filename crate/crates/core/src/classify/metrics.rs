use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClassifyError, Label, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Counts plus the number of regions left out because they were unlabeled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: ConfusionCounts,
    pub unlabeled: u64,
}

/// Tallies predictions against truth. Both maps must cover the same regions.
pub fn confusion(predicted: &BTreeMap<String, Label>, truth: &BTreeMap<String, bool>) -> Result<Confusion> {
    if predicted.len() != truth.len() {
        return Err(ClassifyError::KeyMismatch(format!(
            "{} predicted vs {} truth entries",
            predicted.len(),
            truth.len()
        )));
    }
    let mut out = Confusion::default();
    for (id, &label) in predicted {
        let &actual = truth
            .get(id)
            .ok_or_else(|| ClassifyError::KeyMismatch(format!("region {id:?} has no truth")))?;
        let c = &mut out.counts;
        match (label, actual) {
            (Label::Unlabeled, _) => out.unlabeled += 1,
            (Label::Positive, true) => c.tp += 1,
            (Label::Positive, false) => c.fp += 1,
            (Label::Negative, false) => c.tn += 1,
            (Label::Negative, true) => c.fn_ += 1,
        }
    }
    Ok(out)
}

/// `(TP + TN) / (TP + TN + FP + FN)`
pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    match c.total() {
        0 => Err(ClassifyError::EmptyEvaluation),
        total => Ok((c.tp + c.tn) as f64 / total as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub value: f64,
    /// No positives were predicted or present, so the ratio was 0/0.
    pub degenerate: bool,
}

/// `2·TP / (2·TP + FP + FN)`, or 0 flagged degenerate when the denominator is 0.
pub fn f1(c: &ConfusionCounts) -> F1Score {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        F1Score {
            value: 0.0,
            degenerate: true,
        }
    } else {
        F1Score {
            value: (2 * c.tp) as f64 / denom as f64,
            degenerate: false,
        }
    }
}

pub fn precision(c: &ConfusionCounts) -> Option<f64> {
    (c.tp + c.fp > 0).then(|| c.tp as f64 / (c.tp + c.fp) as f64)
}

pub fn recall(c: &ConfusionCounts) -> Option<f64> {
    (c.tp + c.fn_ > 0).then(|| c.tp as f64 / (c.tp + c.fn_) as f64)
}
