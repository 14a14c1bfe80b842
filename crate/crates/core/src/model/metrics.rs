use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    /// Set when nothing scored at or above the threshold (precision reported as 0).
    pub no_predicted_positives: bool,
}

/// Area under the ROC curve via the Mann-Whitney U statistic; tied scores
/// share their mean rank, so each positive/negative tie counts one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Contract("scores and labels differ in length".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Evaluation("AUC undefined without both classes".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of (1-based, tie-averaged) ranks of the positives, doubled to stay
    // in integers.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += twice_mid * pos_in_group;
        i = j;
    }
    let np = n_pos as u128;
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok(twice_u as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

/// Precision, recall and F1 for the positive class at `threshold`
/// (inclusive), plus AUC.
pub fn compute_metrics(probabilities: &[f64], labels: &[bool], threshold: f64) -> Result<Metrics> {
    let auc = auc(probabilities, labels)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fnc = 0usize;
    for (&p, &l) in probabilities.iter().zip(labels) {
        match (p >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnc += 1,
            (false, false) => {}
        }
    }
    let no_predicted_positives = tp + fp == 0;
    let precision = if no_predicted_positives {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = tp as f64 / (tp + fnc) as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        auc,
        no_predicted_positives,
    })
}
