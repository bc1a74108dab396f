//! Class-weighted precision, recall and F-score.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Per-class scores averaged with weights equal to each class's share of
/// `y_true`. A class's F is 0 when its precision and recall are both 0, and
/// its precision is 0 when it is never predicted.
///
/// Weighted recall reduces to `Σ TP_c / N`, which is computed directly so it
/// equals accuracy bit for bit.
pub fn weighted_prf<L: Ord + Copy>(y_true: &[L], y_pred: &[L]) -> Prf {
    assert_eq!(y_true.len(), y_pred.len(), "label vectors differ in length");
    assert!(!y_true.is_empty(), "no labels");
    let n = y_true.len() as f64;
    let classes: BTreeSet<L> = y_true.iter().copied().collect();
    let mut precision = 0.0;
    let mut f_score = 0.0;
    let mut correct = 0usize;
    for &c in &classes {
        let support = y_true.iter().filter(|&&t| t == c).count();
        let predicted = y_pred.iter().filter(|&&p| p == c).count();
        let tp = y_true.iter().zip(y_pred).filter(|(&t, &p)| t == c && p == c).count();
        correct += tp;
        let p = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let r = tp as f64 / support as f64;
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let w = support as f64 / n;
        precision += w * p;
        f_score += w * f;
    }
    Prf {
        precision,
        recall: correct as f64 / n,
        f_score,
    }
}

pub fn accuracy<L: PartialEq>(y_true: &[L], y_pred: &[L]) -> f64 {
    y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count() as f64 / y_true.len() as f64
}
