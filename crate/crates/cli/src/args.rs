//! Command-line surface. Every flag can also be set through an environment
//! variable named `LIQLAB_<FLAG>` (upper case, dashes as underscores).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "liqlab", version, about = "Liquidity features from tick tapes and next-minute direction classifiers")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores). Output does
    /// not depend on this value.
    #[arg(long, global = true, env = "LIQLAB_JOBS")]
    pub jobs: Option<usize>,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic tick tape.
    Generate(GenerateArgs),
    /// Tape to per-minute buckets and liquidity features.
    Features(FeaturesArgs),
    /// Label, split, standardize and train models from a features directory.
    Train(TrainArgs),
    /// Score trained models on the test slice and render the report.
    Evaluate(EvaluateArgs),
    /// Pick feature subsets on the validation slice, then score on test.
    Select(SelectArgs),
    /// The whole pipeline, tape to report, in one output directory.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML file with synth settings; flags below override it.
    #[arg(long, env = "LIQLAB_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output tape path.
    #[arg(long, env = "LIQLAB_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "LIQLAB_SEED")]
    pub seed: Option<u64>,
    /// Comma-separated ticker symbols.
    #[arg(long, env = "LIQLAB_TICKERS")]
    pub tickers: Option<String>,
    /// Number of weekday sessions.
    #[arg(long, env = "LIQLAB_DAYS")]
    pub days: Option<u32>,
    /// First session date, YYYY-MM-DD.
    #[arg(long, env = "LIQLAB_START_DATE")]
    pub start_date: Option<String>,
    #[arg(long, env = "LIQLAB_TIMEZONE")]
    pub timezone: Option<String>,
    /// Start of generated trading, HH:MM[:SS] local time.
    #[arg(long, env = "LIQLAB_SESSION_START")]
    pub session_start: Option<String>,
    #[arg(long, env = "LIQLAB_SESSION_END")]
    pub session_end: Option<String>,
    /// Probability-scale strength of the planted signal, in [0, 1].
    #[arg(long, env = "LIQLAB_SIGNAL_STRENGTH")]
    pub signal_strength: Option<f64>,
    /// Comma-separated metric names carrying the planted signal.
    #[arg(long, env = "LIQLAB_SIGNAL_FEATURES")]
    pub signal_features: Option<String>,
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    /// Session start, HH:MM[:SS] exchange-local time (inclusive).
    #[arg(long, env = "LIQLAB_SESSION_START", default_value = "11:00:00")]
    pub session_start: String,
    /// Session end, HH:MM[:SS] exchange-local time (exclusive).
    #[arg(long, env = "LIQLAB_SESSION_END", default_value = "16:00:00")]
    pub session_end: String,
    /// IANA timezone of the exchange clock, e.g. America/New_York.
    #[arg(long, env = "LIQLAB_TIMEZONE")]
    pub timezone: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitModeArg {
    Chrono,
    Shuffled,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Train/validation/test percentages.
    #[arg(long, env = "LIQLAB_SPLIT", default_value = "70,15,15")]
    pub split: String,
    #[arg(long, value_enum, env = "LIQLAB_SPLIT_MODE", default_value = "chrono")]
    pub split_mode: SplitModeArg,
    /// Comma-separated active metrics (default: all).
    #[arg(long, env = "LIQLAB_FEATURES")]
    pub features: Option<String>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// lr, svm, rf or all.
    #[arg(long, env = "LIQLAB_MODEL", default_value = "all")]
    pub model: String,
    #[arg(long, env = "LIQLAB_LR_RATE", default_value_t = 0.1)]
    pub lr_rate: f64,
    #[arg(long, env = "LIQLAB_LR_EPOCHS", default_value_t = 500)]
    pub lr_epochs: usize,
    #[arg(long, env = "LIQLAB_LR_L2", default_value_t = 1e-3)]
    pub lr_l2: f64,
    #[arg(long, env = "LIQLAB_SVM_LAMBDA", default_value_t = 1e-2)]
    pub svm_lambda: f64,
    #[arg(long, env = "LIQLAB_SVM_EPOCHS", default_value_t = 200)]
    pub svm_epochs: usize,
    #[arg(long, env = "LIQLAB_RF_TREES", default_value_t = 200)]
    pub rf_trees: usize,
    /// 0 means unlimited.
    #[arg(long, env = "LIQLAB_RF_MAX_DEPTH", default_value_t = 12)]
    pub rf_max_depth: usize,
    #[arg(long, env = "LIQLAB_RF_MIN_LEAF", default_value_t = 5)]
    pub rf_min_leaf: usize,
    /// Features tried per split (default: ceil(sqrt(d))).
    #[arg(long, env = "LIQLAB_RF_MAX_FEATURES")]
    pub rf_max_features: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Tick tape CSV.
    #[arg(long, env = "LIQLAB_INPUT")]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long, env = "LIQLAB_OUT")]
    pub out: PathBuf,
    #[command(flatten)]
    pub session: SessionArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `features`.
    #[arg(long, env = "LIQLAB_INPUT")]
    pub input: PathBuf,
    #[arg(long, env = "LIQLAB_OUT")]
    pub out: PathBuf,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Master seed; per-stage seeds are derived from it.
    #[arg(long, env = "LIQLAB_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory written by `train`.
    #[arg(long, env = "LIQLAB_INPUT")]
    pub input: PathBuf,
    #[arg(long, env = "LIQLAB_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Directory written by `train`.
    #[arg(long, env = "LIQLAB_INPUT")]
    pub input: PathBuf,
    #[arg(long, env = "LIQLAB_OUT")]
    pub out: PathBuf,
    /// forward, topk:<k> or exhaustive:<k>.
    #[arg(long, env = "LIQLAB_SELECT", default_value = "forward")]
    pub select: String,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Tick tape CSV.
    #[arg(long, env = "LIQLAB_INPUT")]
    pub input: PathBuf,
    #[arg(long, env = "LIQLAB_OUT")]
    pub out: PathBuf,
    #[command(flatten)]
    pub session: SessionArgs,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Feature-subset strategy; without it only all-features results are
    /// reported.
    #[arg(long, env = "LIQLAB_SELECT")]
    pub select: Option<String>,
    #[arg(long, env = "LIQLAB_SEED", default_value_t = 0)]
    pub seed: u64,
}
