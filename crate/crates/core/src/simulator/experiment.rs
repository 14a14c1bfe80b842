//! Live-experiment reproduction: engine, random, top-K and binary arms sent
//! to simulated candidates, plus the interval, benefit/cost and feature-subset
//! sweeps.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{generate_population, Population, SimConfig, Vocabulary};
use crate::analysis::{build_subset, significance_report, SubsetName, DEFAULT_ALPHA, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureTable};
use crate::model::{train, CostConfig, LabeledDataset, TrainConfig, TrainedModel};
use crate::recommend::{
    baseline_binary, baseline_topk, interval_sweep, rank_candidates, recommend_ranked, Constraints, RankedList,
    SweepRow,
};

/// A population with features extracted for both pools.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub population: Population,
    pub train: FeatureTable,
    pub candidates: FeatureTable,
    /// Ground-truth outcome per candidate under common random numbers.
    pub outcomes: HashMap<String, bool>,
}

pub fn build_benchmark(cfg: &SimConfig, vocab: &Vocabulary, extractor: &FeatureExtractor) -> Result<Benchmark> {
    let population = generate_population(cfg, vocab)?;
    let corpus = population.corpus()?;
    let train = extractor.labelled_table(&corpus)?;
    let queries: Vec<(String, i64)> = population
        .candidates
        .iter()
        .map(|q| (q.user_id.clone(), q.query_time))
        .collect();
    let candidates = extractor.unlabelled_table(&corpus, &queries)?;
    let outcomes = population.candidates.iter().map(|q| (q.user_id.clone(), q.responds())).collect();
    Ok(Benchmark {
        population,
        train,
        candidates,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub budget: usize,
    pub cost: CostConfig,
    pub train: TrainConfig,
    pub constraints: Constraints,
    /// Restrict the model to these features; `None` defers to
    /// `significant_only`.
    pub features: Option<Vec<String>>,
    /// Without an explicit list, train on the features the chi-square screen
    /// rejects on the training pool, or on all of them if none are rejected.
    pub significant_only: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            budget: 100,
            cost: CostConfig::default(),
            train: TrainConfig::default(),
            constraints: Constraints::default(),
            features: None,
            significant_only: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: String,
    pub sent: usize,
    pub responded: usize,
    pub rate: f64,
    /// Responders reached over all responders in the pool the arm drew from.
    pub recall: f64,
    pub pool_responders: usize,
    pub empty: bool,
    pub selected_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub config_digest: String,
    pub budget: usize,
    pub train_size: usize,
    pub candidate_size: usize,
    pub train_interval: Option<[usize; 2]>,
    pub train_rate: Option<f64>,
    pub test_interval: Option<[usize; 2]>,
    /// Features the engine model was trained on.
    pub feature_count: usize,
    pub arms: Vec<ArmReport>,
}

impl ExperimentReport {
    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == name)
    }

    pub fn rate(&self, name: &str) -> f64 {
        self.arm(name).map_or(0.0, |a| a.rate)
    }
}

fn arm(name: &str, ids: Vec<String>, pool: &[String], outcomes: &HashMap<String, bool>) -> ArmReport {
    let responded = ids.iter().filter(|id| outcomes[*id]).count();
    let pool_responders = pool.iter().filter(|id| outcomes[*id]).count();
    ArmReport {
        arm: name.to_string(),
        sent: ids.len(),
        responded,
        rate: if ids.is_empty() { 0.0 } else { responded as f64 / ids.len() as f64 },
        recall: if pool_responders == 0 { 0.0 } else { responded as f64 / pool_responders as f64 },
        pool_responders,
        empty: ids.is_empty(),
        selected_ids: ids,
    }
}

fn project(table: &FeatureTable, features: &Option<Vec<String>>) -> Result<FeatureTable> {
    match features {
        Some(names) => table.project(names),
        None => Ok(table.clone()),
    }
}

/// The feature list the engine trains on.
pub fn model_features(bench: &Benchmark, cfg: &ExperimentConfig) -> Result<Option<Vec<String>>> {
    if cfg.features.is_some() || !cfg.significant_only {
        return Ok(cfg.features.clone());
    }
    let data = LabeledDataset::from_table(&bench.train, &cfg.cost)?;
    let names = significance_report(&data, DEFAULT_ALPHA, DEFAULT_BINS)?.significant_names();
    Ok((!names.is_empty()).then_some(names))
}

/// Trains on the labelled pool and returns the model with the projected
/// training table.
pub fn train_on(bench: &Benchmark, cfg: &ExperimentConfig) -> Result<(TrainedModel, FeatureTable)> {
    let table = project(&bench.train, &model_features(bench, cfg)?)?;
    let data = LabeledDataset::from_table(&table, &cfg.cost)?;
    Ok((train(&data, &cfg.train)?, table))
}

/// Sends `budget` questions per arm. The random arm draws from the whole
/// candidate pool; the engine, top-K and binary arms then draw from the
/// candidates the random arm left untouched.
pub fn run_live_experiment(bench: &Benchmark, cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentReport> {
    let budget = cfg.budget;
    let m = bench.candidates.rows.len();
    if budget * 4 > bench.population.agents.len() || 2 * budget > m {
        return Err(Error::Config(format!(
            "budget {budget} too large for {m} candidates across 4 arms"
        )));
    }
    let pool: Vec<String> = bench.candidates.rows.iter().map(|r| r.user_id.clone()).collect();
    let mut report = ExperimentReport {
        seed,
        config_digest: bench.population.config.digest(),
        budget,
        train_size: bench.train.rows.len(),
        candidate_size: m,
        train_interval: None,
        train_rate: None,
        test_interval: None,
        feature_count: 0,
        arms: Vec::new(),
    };
    if budget == 0 {
        for name in ["random", "engine", "topk", "binary"] {
            report.arms.push(arm(name, Vec::new(), &pool, &bench.outcomes));
        }
        return Ok(report);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = pool.clone();
    shuffled.shuffle(&mut rng);
    let random_ids: Vec<String> = shuffled[..budget].to_vec();
    report.arms.push(arm("random", random_ids.clone(), &pool, &bench.outcomes));

    let (model, train_table) = train_on(bench, cfg)?;
    report.feature_count = model.feature_names.len();
    let train_ranked = rank_candidates(&model, &train_table)?;
    let mut rest = bench.candidates.project(&model.feature_names)?;
    rest.rows.retain(|r| !random_ids.contains(&r.user_id));
    let rest_ids: Vec<String> = rest.rows.iter().map(|r| r.user_id.clone()).collect();
    let ranked = rank_candidates(&model, &rest)?;
    let m_rest = ranked.len();

    let constraints = Constraints {
        min_fraction: budget as f64 / m_rest as f64,
        ..cfg.constraints
    };
    let sel = recommend_ranked(&train_ranked, &ranked, &constraints)?;
    let start = sel.test_interval[0].min(m_rest + 1 - budget);
    report.train_interval = Some(sel.train_interval);
    report.train_rate = Some(sel.train_rate);
    report.test_interval = Some(sel.test_interval);
    report.arms.push(arm("engine", ranked.slice_ids(start, start + budget - 1), &rest_ids, &bench.outcomes));
    report.arms.push(arm("topk", baseline_topk(&ranked, budget)?, &rest_ids, &bench.outcomes));

    let mut binary = baseline_binary(&ranked).selected_ids;
    if binary.len() > budget {
        let keep: Vec<String> = binary.choose_multiple(&mut rng, budget).cloned().collect();
        binary.retain(|id| keep.contains(id));
    }
    report.arms.push(arm("binary", binary, &rest_ids, &bench.outcomes));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSweepReport {
    pub seed: u64,
    pub train_size: usize,
    pub base_rate: f64,
    pub rows: Vec<SweepRow>,
}

/// Trains on the labelled pool and sweeps minimum interval sizes over its own
/// ranking.
pub fn interval_sweep_experiment(bench: &Benchmark, cfg: &ExperimentConfig, sizes: &[f64]) -> Result<IntervalSweepReport> {
    let (model, table) = train_on(bench, cfg)?;
    let ranked: RankedList = rank_candidates(&model, &table)?;
    let labels = ranked.labels()?;
    let base_rate = labels.iter().filter(|&&l| l).count() as f64 / labels.len().max(1) as f64;
    Ok(IntervalSweepReport {
        seed: bench.population.config.seed,
        train_size: labels.len(),
        base_rate,
        rows: interval_sweep(&labels, sizes)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSweepRow {
    pub benefit_cost_ratio: f64,
    pub engine_rate: f64,
    pub topk_rate: f64,
    pub binary_rate: f64,
    pub binary_sent: usize,
    pub random_rate: f64,
}

/// One live experiment per benefit/cost ratio with `C = 1`.
pub fn cost_sweep(bench: &Benchmark, cfg: &ExperimentConfig, ratios: &[f64], seed: u64) -> Result<Vec<CostSweepRow>> {
    ratios
        .iter()
        .map(|&ratio| {
            let c = ExperimentConfig {
                cost: CostConfig::new(ratio, 1.0)?,
                ..cfg.clone()
            };
            let r = run_live_experiment(bench, &c, seed)?;
            Ok(CostSweepRow {
                benefit_cost_ratio: ratio,
                engine_rate: r.rate("engine"),
                topk_rate: r.rate("topk"),
                binary_rate: r.rate("binary"),
                binary_sent: r.arm("binary").map_or(0, |a| a.sent),
                random_rate: r.rate("random"),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSweepRow {
    pub subset: SubsetName,
    pub feature_count: usize,
    pub engine_rate: Option<f64>,
    /// Set when the subset could not be built, e.g. too few significant features.
    pub skipped: Option<String>,
}

pub fn feature_sweep(bench: &Benchmark, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<FeatureSweepRow>> {
    let data = LabeledDataset::from_table(&bench.train, &cfg.cost)?;
    let report = significance_report(&data, DEFAULT_ALPHA, DEFAULT_BINS)?;
    SubsetName::ALL
        .iter()
        .map(|&name| match build_subset(name, Some(&report), &bench.train.names) {
            Ok(subset) if subset.features.is_empty() => Ok(FeatureSweepRow {
                subset: name,
                feature_count: 0,
                engine_rate: None,
                skipped: Some("empty subset".into()),
            }),
            Ok(subset) => {
                let c = ExperimentConfig {
                    features: Some(subset.features.clone()),
                    ..cfg.clone()
                };
                let r = run_live_experiment(bench, &c, seed)?;
                Ok(FeatureSweepRow {
                    subset: name,
                    feature_count: subset.features.len(),
                    engine_rate: Some(r.rate("engine")),
                    skipped: None,
                })
            }
            Err(e) => Ok(FeatureSweepRow {
                subset: name,
                feature_count: 0,
                engine_rate: None,
                skipped: Some(e.to_string()),
            }),
        })
        .collect()
}
