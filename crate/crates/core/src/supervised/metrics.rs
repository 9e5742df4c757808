//! Classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{CodaError, Result};

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs in which the
/// positive scores higher, ties counting one half. Counts are kept as
/// integers so the result equals explicit pair enumeration exactly.
pub fn auc(scores: &[f64], y: &[bool]) -> Result<f64> {
    check_lengths(scores, y)?;
    if let Some(k) = scores.iter().position(|s| s.is_nan()) {
        return Err(CodaError::NonFinite { row: k, column: 0 });
    }
    let positives = y.iter().filter(|&&v| v).count() as u64;
    let negatives = y.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(CodaError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the number of wins plus ties
    let mut doubled: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let pos = order[start..end].iter().filter(|&&i| y[i]).count() as u64;
        let neg = (end - start) as u64 - pos;
        doubled += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        start = end;
    }
    Ok(doubled as f64 / (2 * positives * negatives) as f64)
}

fn check_lengths(scores: &[f64], y: &[bool]) -> Result<()> {
    if scores.len() != y.len() {
        return Err(CodaError::DimensionMismatch {
            expected: format!("{} scores", y.len()),
            found: format!("{} scores", scores.len()),
        });
    }
    if y.is_empty() {
        return Err(CodaError::InvalidArgument("no samples to score".into()));
    }
    Ok(())
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    /// Undefined when only one class is present.
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub threshold: f64,
    pub true_positives: usize,
    pub true_negatives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Confusion-matrix metrics, predicting the positive class when
/// `score >= threshold`, plus the AUC.
pub fn metrics(scores: &[f64], y: &[bool], threshold: f64) -> Result<ClassifierMetrics> {
    check_lengths(scores, y)?;
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&s, &yi) in scores.iter().zip(y) {
        match (s >= threshold, yi) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    Ok(ClassifierMetrics {
        auc: match auc(scores, y) {
            Ok(a) => Some(a),
            Err(CodaError::SingleClass) => None,
            Err(e) => return Err(e),
        },
        accuracy: (tp + tn) as f64 / y.len() as f64,
        sensitivity: ratio(tp, fn_),
        specificity: ratio(tn, fp),
        threshold,
        true_positives: tp,
        true_negatives: tn,
        false_positives: fp,
        false_negatives: fn_,
    })
}
