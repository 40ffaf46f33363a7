//! Binary classification metrics with explicit zero-denominator rules:
//! precision, recall, and Matthews correlation are all defined as 0 when
//! their denominator vanishes, and nMCC maps correlation from [-1, 1] onto
//! [0, 1] so that chance sits at 0.5.

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Decision threshold shared by every model: a score at or above this is a
/// positive ("feed now") prediction.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Confusion counts for one evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl Confusion {
    /// Thresholds `scores` at [`DECISION_THRESHOLD`] against 0/1 targets.
    pub fn from_scores(scores: &Array1<f64>, targets: &Array1<f64>) -> Confusion {
        assert_eq!(scores.len(), targets.len(), "scores and targets must pair up");
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(targets.iter()) {
            c.record(s >= DECISION_THRESHOLD, y >= 0.5);
        }
        c
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.true_pos += 1,
            (true, false) => self.false_pos += 1,
            (false, false) => self.true_neg += 1,
            (false, true) => self.false_neg += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.true_neg += other.true_neg;
        self.false_neg += other.false_neg;
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.true_pos + self.true_neg) as f64 / self.total() as f64
    }

    /// TP / (TP + FP); 0 when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        let denom = self.true_pos + self.false_pos;
        if denom == 0 {
            0.0
        } else {
            self.true_pos as f64 / denom as f64
        }
    }

    /// TP / (TP + FN); 0 when there are no actual positives.
    pub fn recall(&self) -> f64 {
        let denom = self.true_pos + self.false_neg;
        if denom == 0 {
            0.0
        } else {
            self.true_pos as f64 / denom as f64
        }
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Matthews correlation coefficient; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, tn, fe) = (
            self.true_pos as f64,
            self.false_pos as f64,
            self.true_neg as f64,
            self.false_neg as f64,
        );
        let denom = ((tp + fp) * (tp + fe) * (tn + fp) * (tn + fe)).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fe) / denom
        }
    }

    /// Normalized MCC, `(mcc + 1) / 2`: 1 is perfect, 0.5 is chance-level
    /// (including the all-one-class predictor), 0 is perfect disagreement.
    pub fn nmcc(&self) -> f64 {
        (self.mcc() + 1.0) / 2.0
    }

    pub fn summary(&self) -> MetricSummary {
        MetricSummary {
            accuracy: self.accuracy(),
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
            mcc: self.mcc(),
            nmcc: self.nmcc(),
        }
    }
}

/// The derived metric set reported everywhere.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub nmcc: f64,
}

impl MetricSummary {
    /// Element-wise unweighted mean; the cross-validation aggregate.
    pub fn mean(items: &[MetricSummary]) -> MetricSummary {
        let n = items.len().max(1) as f64;
        let mut out = MetricSummary::default();
        for m in items {
            out.accuracy += m.accuracy;
            out.precision += m.precision;
            out.recall += m.recall;
            out.f1 += m.f1;
            out.mcc += m.mcc;
            out.nmcc += m.nmcc;
        }
        out.accuracy /= n;
        out.precision /= n;
        out.recall /= n;
        out.f1 /= n;
        out.mcc /= n;
        out.nmcc /= n;
        out
    }
}

impl fmt::Display for MetricSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "acc {:.3} prec {:.3} rec {:.3} f1 {:.3} nmcc {:.3}",
            self.accuracy, self.precision, self.recall, self.f1, self.nmcc
        )
    }
}
