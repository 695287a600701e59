use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jampred::ingest::FeatureSet;
use jampred::parallel::WORKERS_ENV;
use jampred::trees::{ModelKind, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "jampred",
    version,
    about = "Traffic jam event pipeline: generate, ingest, train, evaluate, bench"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic jam and alert streams as JSONL.
    Generate(GenerateArgs),
    /// Parse, clean and encode jam JSONL files into a matrix file.
    Ingest(IngestArgs),
    /// Train a model on a matrix file.
    Train(TrainArgs),
    /// Score a trained model on the held-out rows of a matrix file.
    Evaluate(EvaluateArgs),
    /// Train and evaluate several models on one split and tabulate them.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON file with generator settings; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Total number of jam records.
    #[arg(long)]
    pub jams: Option<u64>,
    /// Total number of alert records.
    #[arg(long)]
    pub alerts: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard deviation of the noise added to speed, length and delay,
    /// in units of the gap between level bands.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Start of the publication window, UTC epoch milliseconds.
    #[arg(long)]
    pub start_ms: Option<i64>,
    /// End (exclusive) of the publication window, UTC epoch milliseconds.
    #[arg(long)]
    pub end_ms: Option<i64>,
    /// Split the records over this many file pairs (jams-00000.jsonl, ...).
    #[arg(long, default_value_t = 1)]
    pub shards: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FeatureSetArg {
    Leaky,
    Honest,
}

impl From<FeatureSetArg> for FeatureSet {
    fn from(f: FeatureSetArg) -> Self {
        match f {
            FeatureSetArg::Leaky => FeatureSet::Leaky,
            FeatureSetArg::Honest => FeatureSet::Honest,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DtypeArg {
    F32,
    F64,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input files or glob patterns (repeatable).
    #[arg(long, short, required = true)]
    pub input: Vec<String>,
    #[arg(long, value_enum, default_value = "leaky")]
    pub feature_set: FeatureSetArg,
    /// Element type of the stored matrix.
    #[arg(long, value_enum, default_value = "f64")]
    pub dtype: DtypeArg,
    /// Reuse the category encoding of an existing matrix file (for test sets).
    #[arg(long)]
    pub encoding_from: Option<PathBuf>,
    /// Drop records published before this UTC epoch millisecond.
    #[arg(long)]
    pub window_start_ms: Option<i64>,
    /// Drop records published at or after this UTC epoch millisecond.
    #[arg(long)]
    pub window_end_ms: Option<i64>,
    /// Output matrix file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Rf,
    Gbt,
    Xgb,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Rf => ModelKind::Rf,
            ModelArg::Gbt => ModelKind::Gbt,
            ModelArg::Xgb => ModelKind::Xgb,
        }
    }
}

/// Hyperparameters. Unset flags fall back to the config file, then to the
/// per-model defaults.
#[derive(Debug, Args)]
pub struct TrainFlags {
    /// JSON file with training settings; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub max_leaves: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// L2 penalty on leaf weights.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Minimum gain (boosting) or impurity decrease (forest) to split.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub min_child_weight: Option<f64>,
    #[arg(long)]
    pub max_bins: Option<usize>,
    /// Fraction of rows drawn per forest tree.
    #[arg(long)]
    pub subsample_rows: Option<f64>,
    /// Fraction of features considered per forest node.
    #[arg(long)]
    pub subsample_features: Option<f64>,
    /// Draw forest rows with replacement.
    #[arg(long)]
    pub bootstrap: Option<bool>,
    /// Seed for the train/test split and all model randomness.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Histogram workers; the model does not depend on this.
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
}

impl TrainFlags {
    /// Applies the explicitly given flags on top of `base`.
    pub fn apply(&self, base: TrainConfig) -> TrainConfig {
        let mut c = base;
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(
            n_trees => n_trees,
            max_depth => max_depth,
            max_leaves => max_leaves,
            learning_rate => learning_rate,
            lambda => lambda,
            gamma => gamma,
            min_child_weight => min_child_weight,
            max_bins => max_bins,
            subsample_rows => subsample_rows,
            subsample_features => subsample_features,
            bootstrap => bootstrap,
            seed => seed,
            workers => n_workers
        );
        c
    }
}

#[derive(Debug, Args)]
pub struct SplitFlags {
    /// Fraction of rows used for training; the rest is the test set.
    #[arg(long, default_value_t = jampred::eval::DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
    /// Use every row (no held-out split).
    #[arg(long, conflicts_with = "train_fraction")]
    pub no_split: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Output model file (JSON).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: TrainFlags,
    #[command(flatten)]
    pub split: SplitFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub matrix: PathBuf,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scores at or above this are predicted positive.
    #[arg(long, default_value_t = jampred::eval::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Split seed; defaults to the seed the model was trained with.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub split: SplitFlags,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Comma-separated model list.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "rf,gbt,xgb")]
    pub models: Vec<ModelArg>,
    /// Restrict a leaky matrix to the honest columns (or keep it leaky).
    #[arg(long, value_enum)]
    pub feature_set: Option<FeatureSetArg>,
    /// Directory for bench.json, bench.csv and bench.txt.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = jampred::eval::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = jampred::eval::DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
    #[command(flatten)]
    pub params: TrainFlags,
}
