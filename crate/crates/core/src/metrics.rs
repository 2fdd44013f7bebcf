//! Accuracy and Macro-F1 over aspect predictions.

use alloc::string::String;
use alloc::vec::Vec;

use crate::data::NUM_CLASSES;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassScores {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No gold instance and no prediction of this class; F1 is reported as 0.
    pub undefined: bool,
}

impl ClassScores {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            undefined: tp + fp + fn_ == 0,
        }
    }

    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AspectPrediction {
    pub sentence_id: String,
    pub aspect_index: usize,
    pub gold: usize,
    pub predicted: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub per_class: [ClassScores; NUM_CLASSES],
    pub accuracy: f64,
    pub macro_f1: f64,
    pub total: usize,
    pub correct: usize,
    pub predictions: Vec<AspectPrediction>,
}

impl EvalReport {
    pub fn from_predictions(predictions: Vec<AspectPrediction>) -> Self {
        let mut tp = [0usize; NUM_CLASSES];
        let mut fp = [0usize; NUM_CLASSES];
        let mut fn_ = [0usize; NUM_CLASSES];
        let mut correct = 0;
        for p in &predictions {
            if p.gold == p.predicted {
                tp[p.gold] += 1;
                correct += 1;
            } else {
                fp[p.predicted] += 1;
                fn_[p.gold] += 1;
            }
        }
        let per_class: [ClassScores; NUM_CLASSES] =
            core::array::from_fn(|c| ClassScores::from_counts(tp[c], fp[c], fn_[c]));
        let total = predictions.len();
        Self {
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / NUM_CLASSES as f64,
            per_class,
            total,
            correct,
            predictions,
        }
    }

    /// Report over bare label vectors (no sentence ids).
    pub fn from_labels(gold: &[usize], predicted: &[usize]) -> Self {
        assert_eq!(gold.len(), predicted.len());
        Self::from_predictions(
            gold.iter()
                .zip(predicted)
                .enumerate()
                .map(|(i, (&g, &p))| AspectPrediction {
                    sentence_id: String::new(),
                    aspect_index: i,
                    gold: g,
                    predicted: p,
                })
                .collect(),
        )
    }

    /// Classes whose F1 was defined by convention.
    pub fn undefined_classes(&self) -> Vec<usize> {
        (0..NUM_CLASSES).filter(|&c| self.per_class[c].undefined).collect()
    }
}
