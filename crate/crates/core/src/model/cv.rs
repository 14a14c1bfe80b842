use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compute_metrics, train, LabeledDataset, ModelKind, TrainConfig};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub no_predicted_positives: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ModelKind,
    pub k: usize,
    pub seed: u64,
    pub threshold: f64,
    pub folds: Vec<FoldMetrics>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub mean_auc: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width text table, one row per fold plus the mean.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<6} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9}",
            "fold", "train", "test", "precision", "recall", "f1", "auc"
        );
        for f in &self.folds {
            let _ = writeln!(
                s,
                "{:<6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                f.fold, f.train_size, f.test_size, f.precision, f.recall, f.f1, f.auc
            );
        }
        let _ = writeln!(
            s,
            "{:<6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            "mean", "", "", self.mean_precision, self.mean_recall, self.mean_f1, self.mean_auc
        );
        s
    }
}

/// Assigns each example to one of `k` folds, shuffling each class with the
/// seed and dealing it round-robin. Negatives continue where positives left
/// off so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Evaluation("k must be at least 2".into()));
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.len() < k || neg.len() < k {
        return Err(Error::Evaluation(format!(
            "each class needs at least {k} examples (have {} positive, {} negative)",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = vec![0; labels.len()];
    for (slot, &i) in pos.iter().chain(&neg).enumerate() {
        fold[i] = slot % k;
    }
    Ok(fold)
}

pub fn kfold_evaluate(data: &LabeledDataset, k: usize, config: &TrainConfig, seed: u64) -> Result<EvalReport> {
    const THRESHOLD: f64 = 0.5;
    let assignment = stratified_folds(&data.labels, k, seed)?;
    let folds: Vec<Result<FoldMetrics>> = par::map_range(k, |f| {
        let train_idx: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] != f).collect();
        let test_idx: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] == f).collect();
        let model = train(&data.subset(&train_idx), config)?;
        let probs = test_idx
            .iter()
            .map(|&i| model.predict_proba(&data.rows[i]))
            .collect::<Result<Vec<f64>>>()?;
        let labels: Vec<bool> = test_idx.iter().map(|&i| data.labels[i]).collect();
        let m = compute_metrics(&probs, &labels, THRESHOLD)?;
        Ok(FoldMetrics {
            fold: f,
            train_size: train_idx.len(),
            test_size: test_idx.len(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc: m.auc,
            no_predicted_positives: m.no_predicted_positives,
        })
    });
    let folds = folds.into_iter().collect::<Result<Vec<_>>>()?;
    let mean = |f: fn(&FoldMetrics) -> f64| folds.iter().map(f).sum::<f64>() / k as f64;
    Ok(EvalReport {
        kind: config.kind,
        k,
        seed,
        threshold: THRESHOLD,
        mean_precision: mean(|f| f.precision),
        mean_recall: mean(|f| f.recall),
        mean_f1: mean(|f| f.f1),
        mean_auc: mean(|f| f.auc),
        folds,
    })
}
