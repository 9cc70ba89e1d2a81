use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points in the uniform threshold sweep over `[0, 1]`.
pub const SWEEP_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn metrics(&self) -> PairwiseMetrics {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        // 2PR/(P+R) as one integer ratio, so equal F1 values compare equal.
        let f1 = ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_);
        let accuracy = ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_);
        PairwiseMetrics { precision, recall, f1, accuracy }
    }
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("scores"));
    }
    Ok(())
}

fn check_both_classes(labels: &[bool]) -> Result<()> {
    match (labels.iter().any(|&l| l), labels.iter().any(|&l| !l)) {
        (true, true) => Ok(()),
        (true, false) => Err(Error::SingleClass("positives")),
        _ => Err(Error::SingleClass("negatives")),
    }
}

pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion> {
    check_inputs(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Precision, recall, F1 and accuracy when `score ≥ threshold` predicts a
/// match. Precision is 0 when nothing is predicted positive.
pub fn pairwise_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<PairwiseMetrics> {
    Ok(confusion(scores, labels, threshold)?.metrics())
}

pub fn sweep_grid() -> impl Iterator<Item = f64> {
    (0..SWEEP_POINTS).map(|i| i as f64 / (SWEEP_POINTS - 1) as f64)
}

/// Grid threshold maximizing F1, with ties going to the smallest threshold.
pub fn best_threshold(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    check_inputs(scores, labels)?;
    check_both_classes(labels)?;
    let mut pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let mut neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let at_least = |v: &[f64], t: f64| (v.len() - v.partition_point(|&s| s < t)) as u64;

    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for t in sweep_grid() {
        let tp = at_least(&pos, t);
        let fp = at_least(&neg, t);
        let c = Confusion { tp, fp, fn_: pos.len() as u64 - tp, tn: neg.len() as u64 - fp };
        let f1 = c.metrics().f1;
        if f1 > best.1 {
            best = (t, f1);
        }
    }
    Ok(best)
}

/// Area under the ROC curve as the Mann–Whitney statistic
/// `P(s⁺ > s⁻) + ½·P(s⁺ = s⁻)`.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    check_both_classes(labels)?;
    let mut neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    neg.sort_by(f64::total_cmp);
    let mut n_pos = 0u64;
    // Twice the U statistic, kept integral.
    let mut twice_u = 0u64;
    for (&s, _) in scores.iter().zip(labels).filter(|(_, &l)| l) {
        n_pos += 1;
        let below = neg.partition_point(|&x| x < s) as u64;
        let not_above = neg.partition_point(|&x| x <= s) as u64;
        twice_u += 2 * below + (not_above - below);
    }
    Ok(twice_u as f64 / (2 * n_pos * neg.len() as u64) as f64)
}
