use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "solicit", version, about = "Find strangers likely to answer a question, and pick whom to ask")]
pub struct Cli {
    /// Seed for every random choice the subcommand makes.
    #[arg(long, global = true, env = "SOLICIT_SEED", default_value_t = 42)]
    pub seed: u64,

    /// `key = value` file supplying flag defaults; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Generate a synthetic population and write it as JSONL.
    Simulate(SimulateArgs),
    /// Turn a corpus directory into labelled and candidate feature CSVs.
    Featurize(FeaturizeArgs),
    /// Chi-square significance report and feature subsets.
    Analyze(AnalyzeArgs),
    /// Fit a response model on a labelled feature CSV.
    Train(TrainArgs),
    /// Stratified k-fold evaluation.
    Eval(EvalArgs),
    /// Rank candidates and select whom to ask.
    Recommend(RecommendArgs),
    /// Live-experiment reproduction with interval and benefit/cost sweeps.
    Experiment(ExperimentArgs),
    /// Serve the HTTP API over a simulated deployment.
    Serve(ServeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Featurize(_) => "featurize",
            Command::Analyze(_) => "analyze",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Recommend(_) => "recommend",
            Command::Experiment(_) => "experiment",
            Command::Serve(_) => "serve",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value = "sim")]
    pub out: PathBuf,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub days: Option<u32>,
    #[arg(long)]
    pub mean_rate: Option<f64>,
    #[arg(long)]
    pub corr_w_rho: Option<f64>,
    #[arg(long)]
    pub corr_w_s: Option<f64>,
    #[arg(long)]
    pub direct_questions: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturizeArgs {
    /// Directory written by `simulate`, or any corpus directory.
    #[arg(long, default_value = "sim")]
    pub input: PathBuf,
    /// Labelled rows, one per past solicitation.
    #[arg(long, default_value = "features.csv")]
    pub out: PathBuf,
    /// Unlabelled rows for `candidates.jsonl`, when the input has one.
    #[arg(long, default_value = "candidates.csv")]
    pub candidates_out: PathBuf,
    /// Keep only the most recent posts per user.
    #[arg(long)]
    pub history_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Logistic,
    Svm,
}

#[derive(Debug, Args, Serialize)]
pub struct CostArgs {
    /// Benefit of a response (B); positives are weighted B - C.
    #[arg(long, default_value_t = 2.0)]
    pub benefit: f64,
    /// Cost of a question (C); negatives are weighted C.
    #[arg(long, default_value_t = 1.0)]
    pub cost: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Kind::Logistic)]
    pub kind: Kind,
    /// Feature subset name (all, significant, top10_significant, top4,
    /// common_significant) or a file with one feature name per line.
    #[arg(long, default_value = "all")]
    pub subset: String,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub weights: CostArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long, default_value = "features.csv")]
    pub input: PathBuf,
    #[arg(long, default_value = "analysis.json")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 4)]
    pub bins: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value = "features.csv")]
    pub input: PathBuf,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long, default_value = "features.csv")]
    pub input: PathBuf,
    #[arg(long, default_value = "eval.json")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct RecommendArgs {
    #[arg(long, default_value = "model.json")]
    pub model: PathBuf,
    /// Labelled table the training interval is chosen on.
    #[arg(long, default_value = "features.csv")]
    pub train: PathBuf,
    #[arg(long, default_value = "candidates.csv")]
    pub candidates: PathBuf,
    #[arg(long, default_value = "selection.json")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub min_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub min_length: usize,
    #[arg(long, default_value_t = 0.05)]
    pub top_exclusion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    All,
    Live,
    Interval,
    Cost,
    Features,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    /// Directory written by `simulate`.
    #[arg(long, default_value = "sim")]
    pub input: PathBuf,
    #[arg(long, default_value = "experiment.json")]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub sweep: Vec<Sweep>,
    /// Interval sizes in percent of the training list.
    #[arg(long, value_delimiter = ',', default_value = "25,50,75,100")]
    pub sizes: Vec<f64>,
    /// Benefit/cost ratios for the cost sweep, with C = 1.
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10")]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub budget: usize,
    #[command(flatten)]
    pub weights: CostArgs,
    #[arg(long, value_enum, default_value_t = Kind::Logistic)]
    pub kind: Kind,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long, default_value = "sim")]
    pub input: PathBuf,
    #[arg(long, default_value = "model.json")]
    pub model: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// manual, auto or mixed.
    #[arg(long, default_value = "manual")]
    pub mode: String,
    /// Case-insensitive regex for candidate posts; repeat for several.
    #[arg(long = "rule")]
    pub rules: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub min_fraction: f64,
}
