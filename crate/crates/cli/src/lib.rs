//! The `dear` command: train a bundle, explain one instance, run the
//! benchmark, or serve the HTTP API.
//!
//! Exit codes: 0 success, 1 search failed or internal error, 2 usage or
//! configuration, 3 domain precondition (instance already positive,
//! immutable feature in `S`), 4 environment (port busy).
//!
//! With `--json`, stdout carries a single JSON document and nothing else;
//! progress and diagnostics go to stderr.

mod commands;
mod error;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dear_core::eval::Method;
use dear_core::models::ClassifierArch;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "dear", version, about = "Recourse with disentangled action effects")]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the encoder and classifier and write a model bundle.
    Train(TrainArgs),
    /// Explain one test row or raw instance.
    Recourse(RecourseArgs),
    /// Run every method on the negatively classified test rows.
    Benchmark(BenchmarkArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

/// Where the training data comes from.
#[derive(Debug, Args)]
pub struct DataSource {
    /// CSV with a header row. Relative paths are also looked up under
    /// DEAR_DATA_DIR.
    #[arg(long, requires = "schema", conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,

    /// Feature schema JSON, or a built-in name: `adult`, `compas`, `gmc`.
    #[arg(long, requires = "data")]
    pub schema: Option<PathBuf>,

    /// Label column in the CSV; built-in schemas know theirs, otherwise `label`.
    #[arg(long)]
    pub label: Option<String>,

    /// Generate the synthetic linear dataset, e.g. `a=2,n=2000`.
    #[arg(long)]
    pub synthetic: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: DataSource,

    /// Classifier: `ann` (18-9-3) or `linear`.
    #[arg(long, value_parser = parse_arch)]
    pub model: Option<ClassifierArch>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Classifier epochs.
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Fraction of rows used for training.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,

    /// Also train the CAEs for these action sets, e.g. `age;age,hours-per-week`.
    #[arg(long)]
    pub prewarm: Option<String>,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecourseArgs {
    #[arg(long)]
    pub bundle: PathBuf,

    /// Row index into the bundle's test split.
    #[arg(long, conflicts_with = "features", required_unless_present = "features")]
    pub row: Option<usize>,

    /// Raw instance as a JSON object keyed by feature name.
    #[arg(long)]
    pub features: Option<String>,

    #[arg(long, default_value = "dear", value_parser = parse_method)]
    pub method: Method,

    /// Explicit action set (comma-separated feature names); DEAR only.
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<String>>,

    #[arg(long)]
    pub lambda: Option<f64>,

    #[arg(long)]
    pub max_iterations: Option<usize>,

    /// Print the ranked singleton candidates instead of searching.
    #[arg(long)]
    pub candidates: bool,

    /// Number of candidates for `--candidates`.
    #[arg(long, default_value_t = 6)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub bundle: Option<PathBuf>,

    /// Build the synthetic bundle in-process, e.g. `a=2,n=2000`.
    #[arg(long)]
    pub synthetic: Option<String>,

    #[arg(long, default_value = "dear,scfe,gs,revise,cchvae,face-k,face-e", value_parser = parse_methods)]
    pub methods: MethodList,

    /// Cap on the number of instances.
    #[arg(long)]
    pub limit: Option<usize>,

    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Synthetic data seed; also the baseline seed unless `--seeds` is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Baseline seeds, one full pass each.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,

    /// Report path (dear-report/1 JSON).
    #[arg(long, default_value = "dear-report.json")]
    pub out: PathBuf,

    /// Per-instance CSV; defaults to the report path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bundle: PathBuf,

    #[arg(long, env = "DEAR_PORT", default_value_t = 8080)]
    pub port: u16,

    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,

    /// Allowed CORS origin; any origin when omitted.
    #[arg(long)]
    pub origin: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodList(pub Vec<Method>);

fn parse_method(text: &str) -> Result<Method, String> {
    text.parse().map_err(|e: dear_core::Error| e.to_string())
}

fn parse_methods(text: &str) -> Result<MethodList, String> {
    Method::parse_list(text).map(MethodList).map_err(|e| e.to_string())
}

fn parse_arch(text: &str) -> Result<ClassifierArch, String> {
    match text {
        "ann" => Ok(ClassifierArch::Ann),
        "linear" => Ok(ClassifierArch::Linear),
        _ => Err(format!("unknown model '{text}'; valid: ann, linear")),
    }
}

/// Resolves a data path: as given if it exists, otherwise under
/// `DEAR_DATA_DIR` for relative paths.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("DEAR_DATA_DIR") {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(args) => commands::train(args, cli.json),
        Command::Recourse(args) => commands::recourse(args, cli.json),
        Command::Benchmark(args) => commands::benchmark(args, cli.json),
        Command::Serve(args) => commands::serve(args, cli.json),
    }
}
