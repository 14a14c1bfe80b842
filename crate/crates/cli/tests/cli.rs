use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn solicit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solicit"))
        .args(args)
        .current_dir(dir)
        .env_remove("SOLICIT_SEED")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = solicit(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// simulate + featurize on a small population with default output names.
fn prepared() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--population", "200", "--days", "14"]);
    ok(dir.path(), &["featurize"]);
    dir
}

#[test]
fn default_pipeline_writes_outputs_and_manifests() {
    let dir = prepared();
    let d = dir.path();
    ok(d, &["train", "--benefit", "2", "--cost", "1"]);
    let out = ok(d, &["recommend", "--min-fraction", "0.05"]);
    assert!(out.contains("selected"));

    let sim = json(&d.join("sim/manifest.json"));
    assert_eq!(sim["subcommand"], "simulate");
    assert_eq!(sim["seed"], 42);

    let m = json(&d.join("model.json.manifest.json"));
    assert_eq!(m["notes"]["positive_weight"], 1.0);
    assert_eq!(m["notes"]["negative_weight"], 1.0);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(m["wall_time_secs"].as_f64().unwrap() >= 0.0);

    let sel = json(&d.join("selection.json"));
    let m = sel["candidate_size"].as_u64().unwrap() as f64;
    let k = sel["selected_ids"].as_array().unwrap().len() as f64;
    assert!(k >= (0.05 * m).ceil(), "{k} of {m}");
    assert!(d.join("selection.json.manifest.json").exists());
    assert!(d.join("candidates.csv.manifest.json").exists());
}

#[test]
fn exit_codes_separate_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(solicit(d, &["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(solicit(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(solicit(d, &["train", "--benefit", "1", "--cost", "1"]).status.code(), Some(2));
    assert_eq!(solicit(d, &["recommend", "--min-fraction", "1.5"]).status.code(), Some(2));
    assert_eq!(solicit(d, &["serve", "--mode", "sometimes"]).status.code(), Some(2));
    let missing = solicit(d, &["train", "--input", "absent.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    std::fs::write(d.join("bad.csv"), "user_id,responded\nu1,maybe\n").unwrap();
    assert_eq!(solicit(d, &["train", "--input", "bad.csv"]).status.code(), Some(1));
    assert_eq!(solicit(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn seed_from_environment_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = Command::new(env!("CARGO_BIN_EXE_solicit"))
        .args(["simulate", "--population", "40", "--days", "3", "--out", "env"])
        .current_dir(d)
        .env("SOLICIT_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(json(&d.join("env/manifest.json"))["seed"], 7);

    std::fs::write(d.join("run.toml"), "seed = 11\npopulation = 40\ndays = 3\nout = \"cfg\"\n").unwrap();
    ok(d, &["--config", "run.toml", "simulate"]);
    let m = json(&d.join("cfg/manifest.json"));
    assert_eq!(m["seed"], 11);
    assert_eq!(json(&d.join("cfg/sim_config.json"))["population"], 40);

    // An explicit flag beats the file.
    ok(d, &["--config", "run.toml", "--seed", "5", "simulate", "--out", "flag"]);
    assert_eq!(json(&d.join("flag/manifest.json"))["seed"], 5);

    std::fs::write(d.join("broken.toml"), "population = [\n").unwrap();
    assert_eq!(solicit(d, &["--config", "broken.toml", "simulate"]).status.code(), Some(2));
}

#[test]
fn interval_sweep_prints_one_row_per_size() {
    let dir = prepared();
    let d = dir.path();
    let out = ok(d, &["experiment", "--sweep", "interval", "--sizes", "25,50,75,100", "--budget", "40"]);
    let rows: Vec<&str> = out.lines().filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit())).collect();
    assert_eq!(rows.len(), 4, "{out}");
    let report = json(&d.join("experiment.json"));
    let sweep = report["interval"]["rows"].as_array().unwrap();
    assert_eq!(sweep.len(), 4);
    assert_eq!(sweep[3]["recall"], 1.0);
    assert!(report.get("live").is_none());
}

#[test]
fn experiment_rejects_a_tampered_corpus() {
    let dir = prepared();
    let d = dir.path();
    let posts = d.join("sim/posts.jsonl");
    let text = std::fs::read_to_string(&posts).unwrap();
    let trimmed: Vec<&str> = text.lines().skip(1).collect();
    std::fs::write(&posts, trimmed.join("\n") + "\n").unwrap();
    assert_eq!(solicit(d, &["experiment", "--sweep", "interval"]).status.code(), Some(1));
}

#[test]
fn analyze_and_eval_use_named_subsets() {
    let dir = prepared();
    let d = dir.path();
    ok(d, &["analyze"]);
    let a = json(&d.join("analysis.json"));
    assert_eq!(a["subsets"].as_array().unwrap().len(), 5);
    let table = ok(d, &["eval", "--folds", "3", "--subset", "top4"]);
    assert!(table.contains("mean"));
    assert_eq!(json(&d.join("eval.json"))["folds"].as_array().unwrap().len(), 3);

    std::fs::write(d.join("names.txt"), "MsgCount\nPastResponseRate\n").unwrap();
    ok(d, &["train", "--subset", "names.txt", "--kind", "svm"]);
    assert_eq!(json(&d.join("model.json.manifest.json"))["notes"]["features"], 2);
    assert_eq!(solicit(d, &["train", "--subset", "nonsense"]).status.code(), Some(2));
}
