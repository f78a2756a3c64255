//! Term-frequency threshold detector and its evaluation metrics.
//!
//! The positive class is `original`: traces that still carry self-talk and
//! therefore score high. A score at or above the threshold is predicted
//! positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceClass {
    OriginalLike,
    ReformulatedLike,
}

/// Ties go to `OriginalLike`.
pub fn classify_by_threshold(frequency: f64, threshold: f64) -> TraceClass {
    if frequency >= threshold {
        TraceClass::OriginalLike
    } else {
        TraceClass::ReformulatedLike
    }
}

/// Ground-truth label of a scored trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Original,
    Reformulated,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Original
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub score: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    /// `2TP / (2TP + FP + FN)`; zero when there are no true positives.
    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        let tp2 = 2 * self.tp;
        tp2 as f64 / (tp2 + self.fp + self.fn_) as f64
    }

    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion matrix of the rule `score >= threshold`.
pub fn confusion_at(scores: &[ScoredExample], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for s in scores {
        match (s.score >= threshold, s.label.is_positive()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectReport {
    /// Best F1 over all candidate thresholds.
    pub f1: f64,
    /// Threshold attaining `f1` (the largest one on ties).
    pub threshold_used: f64,
    pub confusion: Confusion,
    /// ROC from the reject-all point (0,0) to the accept-all point (1,1).
    pub roc: Vec<RocPoint>,
    /// Highest TPR among thresholds with FPR within `fpr_budget`.
    pub tpr_at_fpr: f64,
    pub fpr_budget: f64,
    /// Threshold attaining `tpr_at_fpr`; `None` when only rejecting everything fits the budget.
    pub tpr_threshold: Option<f64>,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// Sweeps every distinct score as a threshold.
///
/// Inputs with only one label are rejected with [`Error::RocUndefined`]. When
/// all scores are identical but both labels occur, the only candidate
/// threshold accepts everything, and the report describes that all-positive
/// classifier.
pub fn classifier_metrics(scores: &[ScoredExample], fpr_budget: f64) -> Result<DetectReport> {
    if !(fpr_budget > 0.0 && fpr_budget < 1.0) {
        return Err(Error::InvalidInput(format!(
            "fpr budget {fpr_budget} outside (0, 1)"
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score {}", bad.score)));
    }
    let n_pos = scores.iter().filter(|s| s.label.is_positive()).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::RocUndefined);
    }

    let mut sorted: Vec<ScoredExample> = scores.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut roc = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let mut best: Option<(f64, f64, Confusion)> = None;
    let mut tpr_at_fpr = 0.0;
    let mut tpr_threshold = None;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].score;
        while i < sorted.len() && sorted[i].score == threshold {
            if sorted[i].label.is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let c = Confusion {
            tp,
            fp,
            tn: n_neg - fp,
            fn_: n_pos - tp,
        };
        let (tpr, fpr) = (c.tpr(), c.fpr());
        roc.push(RocPoint { fpr, tpr });
        let f1 = c.f1();
        if best.map_or(true, |(b, _, _)| f1 > b) {
            best = Some((f1, threshold, c));
        }
        if fpr <= fpr_budget && tpr > tpr_at_fpr {
            tpr_at_fpr = tpr;
            tpr_threshold = Some(threshold);
        }
    }
    let (f1, threshold_used, confusion) = best.expect("at least one threshold");
    Ok(DetectReport {
        f1,
        threshold_used,
        confusion,
        roc,
        tpr_at_fpr,
        fpr_budget,
        tpr_threshold,
        n_positive: n_pos,
        n_negative: n_neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(pos: &[f64], neg: &[f64]) -> Vec<ScoredExample> {
        pos.iter()
            .map(|&score| ScoredExample { score, label: Label::Original })
            .chain(neg.iter().map(|&score| ScoredExample { score, label: Label::Reformulated }))
            .collect()
    }

    #[test]
    fn threshold_rule() {
        assert_eq!(classify_by_threshold(0.029, 0.01), TraceClass::OriginalLike);
        assert_eq!(classify_by_threshold(0.004, 0.01), TraceClass::ReformulatedLike);
        assert_eq!(classify_by_threshold(0.01, 0.01), TraceClass::OriginalLike);
    }

    #[test]
    fn perfect_separation() {
        let r = classifier_metrics(&ex(&[0.05, 0.04, 0.03], &[0.01, 0.0]), 0.01).unwrap();
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.tpr_at_fpr, 1.0);
        assert_eq!(r.threshold_used, 0.03);
        assert_eq!(r.roc.first(), Some(&RocPoint { fpr: 0.0, tpr: 0.0 }));
        assert_eq!(r.roc.last(), Some(&RocPoint { fpr: 1.0, tpr: 1.0 }));
    }

    #[test]
    fn overlapping_classes() {
        // Enumerating all thresholds by hand:
        //   t=0.9: TP1 FP0 FN2 -> F1 2/4
        //   t=0.8: TP2 FP0 FN1 -> F1 4/5
        //   t=0.4: TP2 FP1 FN1 -> F1 4/6
        //   t=0.3: TP3 FP1 FN0 -> F1 6/7  (best)
        //   t=0.2: TP3 FP2      -> 6/8;  t=0.1: TP3 FP3 -> 6/9
        let s = ex(&[0.9, 0.8, 0.3], &[0.4, 0.2, 0.1]);
        let at08 = confusion_at(&s, 0.8);
        assert_eq!((at08.tp, at08.fp, at08.fn_), (2, 0, 1));
        assert_eq!(at08.f1(), 0.8);
        let r = classifier_metrics(&s, 0.01).unwrap();
        assert_eq!(r.f1, 6.0 / 7.0);
        assert_eq!(r.threshold_used, 0.3);
        assert!((r.tpr_at_fpr - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.tpr_threshold, Some(0.8));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            classifier_metrics(&ex(&[0.1, 0.2], &[]), 0.01),
            Err(Error::RocUndefined)
        ));
        assert!(matches!(classifier_metrics(&[], 0.01), Err(Error::RocUndefined)));
        let r = classifier_metrics(&ex(&[0.5, 0.5], &[0.5]), 0.01).unwrap();
        assert_eq!(r.f1, 4.0 / 5.0);
        assert_eq!(r.tpr_at_fpr, 0.0);
        assert_eq!(r.tpr_threshold, None);
        assert!(classifier_metrics(&ex(&[0.5], &[0.1]), 0.0).is_err());
        assert!(classifier_metrics(&ex(&[f64::NAN], &[0.1]), 0.1).is_err());
    }
}
