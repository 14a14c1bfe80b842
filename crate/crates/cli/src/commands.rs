use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use solicit_core::analysis::{build_subset, significance_report, FeatureSubset, SubsetName, DEFAULT_ALPHA, DEFAULT_BINS};
use solicit_core::corpus::{read_jsonl, Corpus};
use solicit_core::features::{FeatureConfig, FeatureExtractor, FeatureTable};
use solicit_core::model::{kfold_evaluate, train, CostConfig, LabeledDataset, ModelKind, TrainConfig, TrainedModel};
use solicit_core::recommend::{recommend, Constraints};
use solicit_core::simulator::experiment::build_benchmark;
use solicit_core::simulator::{
    cost_sweep, feature_sweep, generate_population, interval_sweep_experiment, read_config, run_live_experiment,
    CandidateRecord, Deployment, ExperimentConfig, SimConfig, Vocabulary, CANDIDATES_FILE,
};
use solicit_service::{Mode, ServiceConfig, Session};

use crate::args::*;
use crate::Failure;

/// What a subcommand read and wrote, for its manifest.
#[derive(Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub notes: Map<String, Value>,
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let body = serde_json::to_string_pretty(value).map_err(|e| Failure::data(e.to_string()))?;
    std::fs::write(path, body + "\n").map_err(|e| Failure::data(format!("writing {}: {e}", path.display())))
}

fn read_labelled(path: &Path) -> Result<FeatureTable, Failure> {
    let table = FeatureTable::read_csv_path(path)?;
    if !table.is_labelled() {
        return Err(Failure::data(format!("{} has no labelled rows", path.display())));
    }
    Ok(table)
}

fn cost_config(w: &CostArgs) -> Result<CostConfig, Failure> {
    CostConfig::new(w.benefit, w.cost).map_err(|e| Failure::usage(e.to_string()))
}

fn train_config(kind: Kind, lambda: Option<f64>, seed: u64) -> Result<TrainConfig, Failure> {
    let mut c = TrainConfig::with_kind(match kind {
        Kind::Logistic => ModelKind::Logistic,
        Kind::Svm => ModelKind::LinearSvm,
    });
    c.logistic.seed = seed;
    c.svm.seed = seed;
    if let Some(l) = lambda {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Failure::usage(format!("--lambda must be positive, got {l}")));
        }
        c.logistic.lambda = l;
        c.svm.lambda = l;
    }
    Ok(c)
}

/// A subset name, or a path to a file of feature names.
fn resolve_subset(arg: &str, table: &FeatureTable, cost: &CostConfig) -> Result<Vec<String>, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(FeatureSubset::read_names(path)?);
    }
    let name: SubsetName = arg
        .parse()
        .map_err(|_| Failure::usage(format!("--subset {arg:?} is neither a subset name nor a file")))?;
    let report = if name.needs_report() {
        let data = LabeledDataset::from_table(table, cost)?;
        Some(significance_report(&data, DEFAULT_ALPHA, DEFAULT_BINS)?)
    } else {
        None
    };
    Ok(build_subset(name, report.as_ref(), &table.names)?.features)
}

fn model_data(table: &FeatureTable, m: &ModelArgs, cost: CostConfig) -> Result<(LabeledDataset, CostConfig), Failure> {
    let names = resolve_subset(&m.subset, table, &cost)?;
    if names.is_empty() {
        return Err(Failure::data(format!("subset {:?} selects no features", m.subset)));
    }
    let projected = table.project(&names)?;
    Ok((LabeledDataset::from_table(&projected, &cost)?, cost))
}

pub fn simulate(a: &SimulateArgs, seed: u64) -> Result<Outcome, Failure> {
    let d = SimConfig::default();
    let cfg = SimConfig {
        population: a.population.unwrap_or(d.population),
        days: a.days.unwrap_or(d.days),
        mean_rate: a.mean_rate.unwrap_or(d.mean_rate),
        corr_w_rho: a.corr_w_rho.unwrap_or(d.corr_w_rho),
        corr_w_s: a.corr_w_s.unwrap_or(d.corr_w_s),
        direct_questions: a.direct_questions.unwrap_or(d.direct_questions),
        seed,
        ..d
    };
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let pop = generate_population(&cfg, &Vocabulary::shipped())?;
    pop.write_dir(&a.out)?;
    println!(
        "simulated {} agents, {} posts, {} labelled, {} candidates into {}",
        pop.agents.len(),
        pop.posts.len(),
        pop.train.len(),
        pop.candidates.len(),
        a.out.display()
    );
    let mut notes = Map::new();
    notes.insert("config_digest".into(), json!(cfg.digest()));
    Ok(Outcome {
        inputs: Vec::new(),
        outputs: vec![a.out.clone()],
        notes,
    })
}

pub fn featurize(a: &FeaturizeArgs) -> Result<Outcome, Failure> {
    let corpus = Corpus::load_dir(&a.input)?;
    let extractor = FeatureExtractor::shipped(FeatureConfig {
        history_cap: a.history_cap,
        ..FeatureConfig::default()
    });
    let table = extractor.labelled_table(&corpus)?;
    table.write_csv_path(&a.out)?;
    println!("wrote {} ({} rows, {} features)", a.out.display(), table.rows.len(), table.names.len());
    let mut outputs = vec![a.out.clone()];
    let cand_path = a.input.join(CANDIDATES_FILE);
    if cand_path.exists() {
        let records: Vec<CandidateRecord> = read_jsonl(&cand_path)?;
        let queries: Vec<(String, i64)> = records.into_iter().map(|r| (r.user_id, r.query_time)).collect();
        let cands = extractor.unlabelled_table(&corpus, &queries)?;
        cands.write_csv_path(&a.candidates_out)?;
        println!("wrote {} ({} rows)", a.candidates_out.display(), cands.rows.len());
        outputs.push(a.candidates_out.clone());
    }
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs,
        notes: Map::new(),
    })
}

pub fn analyze(a: &AnalyzeArgs) -> Result<Outcome, Failure> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Failure::usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    if a.bins < 2 {
        return Err(Failure::usage("--bins must be at least 2"));
    }
    let table = read_labelled(&a.input)?;
    let data = LabeledDataset::from_table(&table, &CostConfig::default())?;
    let report = significance_report(&data, a.alpha, a.bins)?;
    let subsets: Vec<Value> = SubsetName::ALL
        .iter()
        .map(|&n| match build_subset(n, Some(&report), &table.names) {
            Ok(s) => json!({ "name": n, "features": s.features }),
            Err(e) => json!({ "name": n, "error": e.to_string() }),
        })
        .collect();
    write_json(&a.out, &json!({ "report": report, "subsets": subsets }))?;
    println!(
        "tested {} features, {} significant at threshold {:.3e}, estimated FDR {:.3}",
        report.tested, report.rejected, report.threshold, report.fdr
    );
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs: vec![a.out.clone()],
        notes: Map::new(),
    })
}

pub fn train_cmd(a: &TrainArgs, seed: u64) -> Result<Outcome, Failure> {
    let config = train_config(a.model.kind, a.model.lambda, seed)?;
    let cost = cost_config(&a.model.weights)?;
    let table = read_labelled(&a.input)?;
    let (data, cost) = model_data(&table, &a.model, cost)?;
    let model = train(&data, &config)?;
    model.save(&a.out)?;
    println!(
        "trained {} on {} rows x {} features (converged: {})",
        model.kind,
        data.len(),
        data.width(),
        model.metadata.converged
    );
    let mut notes = Map::new();
    notes.insert("positive_weight".into(), json!(cost.positive_weight()));
    notes.insert("negative_weight".into(), json!(cost.negative_weight()));
    notes.insert("features".into(), json!(model.feature_names.len()));
    notes.insert("converged".into(), json!(model.metadata.converged));
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs: vec![a.out.clone()],
        notes,
    })
}

pub fn eval(a: &EvalArgs, seed: u64) -> Result<Outcome, Failure> {
    if a.folds < 2 {
        return Err(Failure::usage("--folds must be at least 2"));
    }
    let config = train_config(a.model.kind, a.model.lambda, seed)?;
    let cost = cost_config(&a.model.weights)?;
    let table = read_labelled(&a.input)?;
    let (data, cost) = model_data(&table, &a.model, cost)?;
    let report = kfold_evaluate(&data, a.folds, &config, seed)?;
    std::fs::write(&a.out, report.to_json()? + "\n").map_err(|e| Failure::data(format!("writing {}: {e}", a.out.display())))?;
    print!("{}", report.to_table());
    let mut notes = Map::new();
    notes.insert("positive_weight".into(), json!(cost.positive_weight()));
    notes.insert("negative_weight".into(), json!(cost.negative_weight()));
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs: vec![a.out.clone()],
        notes,
    })
}

pub fn recommend_cmd(a: &RecommendArgs) -> Result<Outcome, Failure> {
    let constraints = Constraints {
        min_fraction: a.min_fraction,
        min_length: a.min_length,
        top_exclusion_fraction: a.top_exclusion,
    };
    constraints.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let model = TrainedModel::load(&a.model)?;
    let train_table = read_labelled(&a.train)?;
    let candidates = FeatureTable::read_csv_path(&a.candidates)?;
    if candidates.rows.is_empty() {
        return Err(Failure::data(format!("{} has no candidates", a.candidates.display())));
    }
    let sel = recommend(&model, &train_table, &candidates, &constraints)?;
    std::fs::write(&a.out, sel.to_json()? + "\n").map_err(|e| Failure::data(format!("writing {}: {e}", a.out.display())))?;
    println!(
        "selected {} of {} candidates (ranks {}..={}; training interval {}..={} at rate {:.3})",
        sel.selected_ids.len(),
        sel.candidate_size,
        sel.test_interval[0],
        sel.test_interval[1],
        sel.train_interval[0],
        sel.train_interval[1],
        sel.train_rate
    );
    Ok(Outcome {
        inputs: vec![a.model.clone(), a.train.clone(), a.candidates.clone()],
        outputs: vec![a.out.clone()],
        notes: Map::new(),
    })
}

pub fn experiment(a: &ExperimentArgs, seed: u64) -> Result<Outcome, Failure> {
    if a.sizes.is_empty() || a.sizes.iter().any(|s| !(*s > 0.0 && *s <= 100.0)) {
        return Err(Failure::usage("--sizes must be percentages in (0, 100]"));
    }
    if a.ratios.iter().any(|r| !(*r > 1.0 && r.is_finite())) {
        return Err(Failure::usage("--ratios must exceed 1 (benefit > cost = 1)"));
    }
    let cost = cost_config(&a.weights)?;
    let sim = read_config(&a.input)?;
    let bench = build_benchmark(&sim, &Vocabulary::shipped(), &FeatureExtractor::shipped(FeatureConfig::default()))?;
    let on_disk = Corpus::load_dir(&a.input)?;
    if on_disk.posts() != bench.population.posts.as_slice() || on_disk.solicitations() != bench.population.solicitations.as_slice() {
        return Err(Failure::data(format!(
            "{} does not match the population its sim_config.json generates",
            a.input.display()
        )));
    }
    let cfg = ExperimentConfig {
        budget: a.budget,
        cost,
        train: train_config(a.kind, None, seed)?,
        ..ExperimentConfig::default()
    };
    let want = |s: Sweep| a.sweep.contains(&Sweep::All) || a.sweep.contains(&s);
    let mut report = Map::new();
    report.insert("seed".into(), json!(seed));
    report.insert("population_seed".into(), json!(sim.seed));
    report.insert("config_digest".into(), json!(sim.digest()));
    if want(Sweep::Live) {
        let r = run_live_experiment(&bench, &cfg, seed)?;
        println!("live experiment (budget {}):", r.budget);
        for arm in &r.arms {
            println!("  {:<8} sent {:>4}  responded {:>4}  rate {:.3}", arm.arm, arm.sent, arm.responded, arm.rate);
        }
        report.insert("live".into(), serde_json::to_value(r).map_err(|e| Failure::data(e.to_string()))?);
    }
    if want(Sweep::Interval) {
        let fractions: Vec<f64> = a.sizes.iter().map(|s| s / 100.0).collect();
        let r = interval_sweep_experiment(&bench, &cfg, &fractions)?;
        println!("interval sweep on training data (base rate {:.3}):", r.base_rate);
        println!("  {:>6} {:>12} {:>7} {:>7}", "size", "interval", "rate", "recall");
        for row in &r.rows {
            println!(
                "  {:>5.0}% {:>12} {:>7.3} {:>7.3}",
                row.size * 100.0,
                format!("[{}, {}]", row.interval[0], row.interval[1]),
                row.rate,
                row.recall
            );
        }
        report.insert("interval".into(), serde_json::to_value(r).map_err(|e| Failure::data(e.to_string()))?);
    }
    if want(Sweep::Cost) {
        let rows = cost_sweep(&bench, &cfg, &a.ratios, seed)?;
        println!("benefit/cost sweep:");
        for r in &rows {
            println!(
                "  B/C {:>5.1}  engine {:.3}  topk {:.3}  binary {:.3} ({} sent)  random {:.3}",
                r.benefit_cost_ratio, r.engine_rate, r.topk_rate, r.binary_rate, r.binary_sent, r.random_rate
            );
        }
        report.insert("cost".into(), serde_json::to_value(rows).map_err(|e| Failure::data(e.to_string()))?);
    }
    if want(Sweep::Features) {
        let rows = feature_sweep(&bench, &cfg, seed)?;
        println!("feature subsets:");
        for r in &rows {
            match r.engine_rate {
                Some(rate) => println!("  {:<20} {:>3} features  engine {:.3}", r.subset.as_str(), r.feature_count, rate),
                None => println!("  {:<20} skipped", r.subset.as_str()),
            }
        }
        report.insert("features".into(), serde_json::to_value(rows).map_err(|e| Failure::data(e.to_string()))?);
    }
    write_json(&a.out, &report)?;
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs: vec![a.out.clone()],
        notes: Map::new(),
    })
}

pub fn serve(a: &ServeArgs, seed: u64) -> Result<Outcome, Failure> {
    let mode: Mode = a.mode.parse().map_err(|e: solicit_service::SessionError| Failure::usage(e.to_string()))?;
    let constraints = Constraints {
        min_fraction: a.min_fraction,
        ..Constraints::default()
    };
    constraints.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let addr: SocketAddr = (a.host.as_str(), a.port)
        .to_socket_addrs()
        .ok()
        .and_then(|mut it| it.next())
        .ok_or_else(|| Failure::usage(format!("cannot resolve {}:{}", a.host, a.port)))?;
    let deployment = Deployment::load(&a.input)?;
    let model = TrainedModel::load(&a.model)?;
    let mut cfg = ServiceConfig {
        mode,
        seed,
        constraints,
        ..ServiceConfig::default()
    };
    if !a.rules.is_empty() {
        cfg.rules = a.rules.clone();
    }
    let session = Session::new(deployment, model, cfg).map_err(|e| Failure::data(e.to_string()))?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::data(format!("starting runtime: {e}")))?;
    eprintln!("listening on http://{addr} in {mode} mode");
    rt.block_on(solicit_service::serve(session, addr))
        .map_err(|e| Failure::data(format!("cannot serve on {addr}: {e}")))?;
    Ok(Outcome::default())
}
