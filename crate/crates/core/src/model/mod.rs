//! Cost-weighted response-likelihood classifiers.
//!
//! Responders carry weight `B - C` and non-responders weight `C`, so a missed
//! responder costs the forgone net benefit and a wasted question costs the
//! price of asking.

pub mod calibration;
pub mod cv;
pub mod logistic;
pub mod metrics;
pub mod standardize;
pub mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use calibration::Platt;
pub use cv::{kfold_evaluate, stratified_folds, EvalReport, FoldMetrics};
pub use logistic::LogisticParams;
pub use metrics::{auc, compute_metrics, Metrics};
pub use standardize::Standardizer;
pub use svm::SvmParams;

use crate::error::{Error, Result};
use crate::features::{FeatureTable, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    pub benefit: f64,
    pub cost: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            benefit: 2.0,
            cost: 1.0,
        }
    }
}

impl CostConfig {
    pub fn new(benefit: f64, cost: f64) -> Result<Self> {
        let c = CostConfig { benefit, cost };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cost > 0.0 && self.benefit > self.cost && self.benefit.is_finite()) {
            return Err(Error::Config(format!(
                "benefit {} and cost {} must satisfy benefit > cost > 0",
                self.benefit, self.cost
            )));
        }
        Ok(())
    }

    pub fn positive_weight(&self) -> f64 {
        self.benefit - self.cost
    }

    pub fn negative_weight(&self) -> f64 {
        self.cost
    }
}

/// `B - C` for responders, `C` for everyone else.
pub fn assign_weights(labels: &[bool], cost: &CostConfig) -> Result<Vec<f64>> {
    cost.validate()?;
    Ok(labels
        .iter()
        .map(|&y| if y { cost.positive_weight() } else { cost.negative_weight() })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub names: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub labels: Vec<bool>,
    pub weights: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(
        names: Vec<String>,
        ids: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
        labels: Vec<bool>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = rows.len();
        if ids.len() != n || labels.len() != n || weights.len() != n {
            return Err(Error::Contract("dataset columns differ in length".into()));
        }
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(Error::Contract("dataset row width differs from feature names".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Contract("sample weights must be positive".into()));
        }
        Ok(LabeledDataset {
            names,
            ids,
            rows,
            labels,
            weights,
        })
    }

    /// Builds a dataset from a labelled feature table with B/C weights.
    pub fn from_table(table: &FeatureTable, cost: &CostConfig) -> Result<Self> {
        let mut labels = Vec::with_capacity(table.rows.len());
        for r in &table.rows {
            labels.push(
                r.label
                    .ok_or_else(|| Error::Data(format!("row for {} has no label", r.user_id)))?,
            );
        }
        let weights = assign_weights(&labels, cost)?;
        Self::new(
            table.names.clone(),
            table.rows.iter().map(|r| r.user_id.clone()).collect(),
            table.rows.iter().map(|r| r.values.clone()).collect(),
            labels,
            weights,
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            names: self.names.clone(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l).count();
        (pos, self.len() - pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    LinearSvm,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ModelKind::Logistic),
            "svm" | "linear_svm" => Ok(ModelKind::LinearSvm),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Logistic => "logistic",
            ModelKind::LinearSvm => "linear_svm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub logistic: LogisticParams,
    pub svm: SvmParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: ModelKind::Logistic,
            logistic: LogisticParams::default(),
            svm: SvmParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn with_kind(kind: ModelKind) -> Self {
        TrainConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn seed(&self) -> u64 {
        match self.kind {
            ModelKind::Logistic => self.logistic.seed,
            ModelKind::LinearSvm => self.svm.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub hyperparameters: serde_json::Value,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub standardizer: Standardizer,
    pub calibration: Option<Platt>,
    pub metadata: TrainingMetadata,
}

impl TrainedModel {
    /// Raw linear score on the standardized, imputed input.
    pub fn decision(&self, row: &[Option<f64>]) -> Result<f64> {
        let x = self.standardizer.transform(row)?;
        Ok(x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>() + self.intercept)
    }

    /// Response probability for a row laid out like `feature_names`.
    pub fn predict_proba(&self, row: &[Option<f64>]) -> Result<f64> {
        let z = self.decision(row)?;
        Ok(match (&self.kind, &self.calibration) {
            (ModelKind::LinearSvm, Some(p)) => p.apply(z),
            _ => logistic::sigmoid(z),
        })
    }

    /// Picks the model's features out of a full vector by name.
    pub fn select(&self, names: &[String], values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
        if names == self.feature_names.as_slice() {
            return Ok(values.to_vec());
        }
        self.feature_names
            .iter()
            .map(|n| {
                names
                    .iter()
                    .position(|m| m == n)
                    .map(|i| values[i])
                    .ok_or_else(|| Error::Contract(format!("input lacks model feature {n:?}")))
            })
            .collect()
    }

    pub fn predict_vector(&self, v: &FeatureVector) -> Result<f64> {
        let row = self.select(&v.names, &v.options())?;
        self.predict_proba(&row)
    }

    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        table
            .rows
            .iter()
            .map(|r| self.predict_proba(&self.select(&table.names, &r.values)?))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(s)?;
        let d = m.feature_names.len();
        if m.coefficients.len() != d || m.standardizer.width() != d {
            return Err(Error::Data("model arrays disagree with feature_names".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&s)
    }
}

/// Trains the configured model kind on `data`.
pub fn train(data: &LabeledDataset, config: &TrainConfig) -> Result<TrainedModel> {
    match config.kind {
        ModelKind::Logistic => train_logistic(data, &config.logistic),
        ModelKind::LinearSvm => train_svm(data, &config.svm),
    }
}

struct Prepared {
    standardizer: Standardizer,
    x: Vec<f64>,
    y: Vec<f64>,
}

fn prepare(data: &LabeledDataset) -> Result<Prepared> {
    let (pos, neg) = data.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::Training("training data must contain both classes".into()));
    }
    let standardizer = Standardizer::fit(&data.rows, data.width())?;
    let x = standardizer.transform_all(&data.rows)?;
    let y = data.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    Ok(Prepared { standardizer, x, y })
}

pub fn train_logistic(data: &LabeledDataset, params: &LogisticParams) -> Result<TrainedModel> {
    let p = prepare(data)?;
    let problem = logistic::LogisticProblem {
        x: &p.x,
        y: &p.y,
        weights: &data.weights,
        lambda: params.lambda,
        pinned: &p.standardizer.pinned,
    };
    let (theta, trace) = logistic::fit(&problem, params)?;
    let d = data.width();
    Ok(TrainedModel {
        kind: ModelKind::Logistic,
        feature_names: data.names.clone(),
        coefficients: theta[..d].to_vec(),
        intercept: theta[d],
        standardizer: p.standardizer,
        calibration: None,
        metadata: TrainingMetadata {
            seed: params.seed,
            hyperparameters: serde_json::to_value(params)?,
            iterations: trace.iterations,
            converged: trace.converged,
            final_objective: *trace.objective.last().unwrap_or(&f64::NAN),
        },
    })
}

pub fn train_svm(data: &LabeledDataset, params: &SvmParams) -> Result<TrainedModel> {
    let p = prepare(data)?;
    let problem = svm::SvmProblem {
        x: &p.x,
        y: &p.y,
        weights: &data.weights,
        pinned: &p.standardizer.pinned,
    };
    let theta = svm::fit(&problem, params)?;
    let margins: Vec<f64> = (0..data.len()).map(|i| problem.margin(&theta, i)).collect();
    let platt = Platt::fit(&margins, &data.labels);
    let final_objective = problem.objective(&theta, params.lambda);
    let d = data.width();
    Ok(TrainedModel {
        kind: ModelKind::LinearSvm,
        feature_names: data.names.clone(),
        coefficients: theta[..d].to_vec(),
        intercept: theta[d],
        standardizer: p.standardizer,
        calibration: Some(platt),
        metadata: TrainingMetadata {
            seed: params.seed,
            hyperparameters: serde_json::to_value(params)?,
            iterations: params.epochs,
            converged: true,
            final_objective,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: Vec<Vec<Option<f64>>>, labels: Vec<bool>, weights: Vec<f64>) -> LabeledDataset {
        let d = rows[0].len();
        let n = rows.len();
        LabeledDataset::new(
            (0..d).map(|j| format!("f{j}")).collect(),
            (0..n).map(|i| format!("u{i}")).collect(),
            rows,
            labels,
            weights,
        )
        .unwrap()
    }

    #[test]
    fn weights_follow_benefit_and_cost() {
        let w = assign_weights(&[true, false, true], &CostConfig::new(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(w, vec![1.0, 1.0, 1.0]);
        let w = assign_weights(&[true, false], &CostConfig { benefit: 11.0, cost: 1.0 }).unwrap();
        assert_eq!(w, vec![10.0, 1.0]);
        assert!(matches!(CostConfig::new(1.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn zero_features_balanced_labels_give_half() {
        let data = ds(vec![vec![Some(0.0)]; 4], vec![true, false, true, false], vec![1.0; 4]);
        let m = train_logistic(&data, &LogisticParams::default()).unwrap();
        assert!(m.intercept.abs() < 1e-9);
        assert!((m.predict_proba(&[Some(3.0)]).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn separable_1d_is_monotone() {
        let rows: Vec<Vec<Option<f64>>> = (0..10).map(|i| vec![Some(i as f64)]).collect();
        let labels: Vec<bool> = (0..10).map(|i| i >= 5).collect();
        let m = train_logistic(&ds(rows.clone(), labels, vec![1.0; 10]), &LogisticParams::default()).unwrap();
        let p: Vec<f64> = rows.iter().map(|r| m.predict_proba(r).unwrap()).collect();
        assert!(p.windows(2).all(|w| w[1] > w[0]), "{p:?}");
    }

    #[test]
    fn single_class_is_rejected() {
        let data = ds(vec![vec![Some(1.0)]; 3], vec![true; 3], vec![1.0; 3]);
        assert!(matches!(train_logistic(&data, &LogisticParams::default()), Err(Error::Training(_))));
        assert!(matches!(train_svm(&data, &SvmParams::default()), Err(Error::Training(_))));
    }

    #[test]
    fn masked_row_predicts_at_imputation_point() {
        let rows: Vec<Vec<Option<f64>>> = (0..12)
            .map(|i| vec![Some(i as f64), Some((i % 4) as f64)])
            .collect();
        let labels: Vec<bool> = (0..12).map(|i| i % 3 == 0 || i > 8).collect();
        let m = train_logistic(&ds(rows, labels, vec![1.0; 12]), &LogisticParams::default()).unwrap();
        let at_mean = m
            .predict_proba(&[Some(m.standardizer.imputation[0]), Some(m.standardizer.imputation[1])])
            .unwrap();
        assert_eq!(m.predict_proba(&[None, None]).unwrap(), at_mean);
        assert!(matches!(m.predict_proba(&[None]), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_coefficient_model_is_half() {
        let m = TrainedModel {
            kind: ModelKind::Logistic,
            feature_names: vec!["a".into()],
            coefficients: vec![0.0],
            intercept: 0.0,
            standardizer: Standardizer {
                means: vec![0.0],
                stds: vec![1.0],
                imputation: vec![0.0],
                pinned: vec![false],
            },
            calibration: None,
            metadata: TrainingMetadata {
                seed: 0,
                hyperparameters: serde_json::Value::Null,
                iterations: 0,
                converged: true,
                final_objective: 0.0,
            },
        };
        for x in [-5.0, 0.0, 123.0] {
            assert_eq!(m.predict_proba(&[Some(x)]).unwrap(), 0.5);
        }
        let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn svm_separates_separable_data() {
        let rows: Vec<Vec<Option<f64>>> = (0..20)
            .map(|i| {
                let s = if i < 10 { -1.0 } else { 1.0 };
                vec![Some(s * (1.0 + (i % 5) as f64 * 0.3)), Some((i % 7) as f64)]
            })
            .collect();
        let labels: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let data = ds(rows.clone(), labels.clone(), vec![1.0; 20]);
        let m = train_svm(&data, &SvmParams::default()).unwrap();
        for (r, &l) in rows.iter().zip(&labels) {
            let margin = m.decision(r).unwrap();
            assert_eq!(margin > 0.0, l, "margin {margin}");
        }
        let p = m.standardizer.transform_all(&data.rows).unwrap();
        let y: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
        let problem = svm::SvmProblem {
            x: &p,
            y: &y,
            weights: &data.weights,
            pinned: &m.standardizer.pinned,
        };
        let mut theta = m.coefficients.clone();
        theta.push(m.intercept);
        assert!(problem.hinge(&theta) < 1e-3, "hinge {}", problem.hinge(&theta));
    }
}
