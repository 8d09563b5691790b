//! The run configuration echoed into every artifact, and flag validation.

use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use liqlab_core::artifact::sha256_hex;
use liqlab_core::eval::Strategy;
use liqlab_core::models::{ForestConfig, LogisticConfig, SvmConfig};
use liqlab_core::synth::SynthConfig;
use liqlab_core::{derive_seed, Metric, ModelKind, ModelSpec, SessionWindow, SplitFractions, SplitMode, Tz};
use serde::Serialize;
use serde_json::Value;

use crate::args::{DatasetArgs, GenerateArgs, ModelArgs, SessionArgs, SplitModeArg};
use crate::error::CliError;

/// A consumed input file and the SHA-256 of the bytes read.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputRef {
    pub path: String,
    pub sha256: String,
}

impl InputRef {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionConfig {
    pub start: NaiveTime,
    pub end: NaiveTime,
    pub timezone: String,
}

impl SessionConfig {
    pub fn from_args(args: &SessionArgs) -> Result<Self, CliError> {
        let config = Self {
            start: parse_time(&args.session_start)?,
            end: parse_time(&args.session_end)?,
            timezone: args.timezone.clone(),
        };
        config.window()?;
        config.tz()?;
        Ok(config)
    }

    pub fn window(&self) -> Result<SessionWindow, CliError> {
        Ok(SessionWindow::new(self.start, self.end)?)
    }

    pub fn tz(&self) -> Result<Tz, CliError> {
        parse_tz(&self.timezone)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetConfig {
    pub split: SplitFractions,
    pub split_mode: SplitMode,
    pub features: Vec<Metric>,
}

impl DatasetConfig {
    pub fn from_args(args: &DatasetArgs, seed: u64) -> Result<Self, CliError> {
        let split: SplitFractions = args
            .split
            .parse()
            .map_err(|e: liqlab_core::dataset::DatasetError| CliError::Config(e.to_string()))?;
        let split_mode = match args.split_mode {
            SplitModeArg::Chrono => SplitMode::Chronological,
            SplitModeArg::Shuffled => SplitMode::Shuffled {
                seed: derive_seed(seed, "split"),
            },
        };
        let features = match &args.features {
            Some(list) => parse_metrics(list)?,
            None => Metric::ALL.to_vec(),
        };
        if features.is_empty() {
            return Err(CliError::Config("--features names no metric".into()));
        }
        Ok(Self {
            split,
            split_mode,
            features,
        })
    }
}

/// Model specs with per-model seeds derived from the master seed.
pub fn model_specs(args: &ModelArgs, seed: u64) -> Result<Vec<ModelSpec>, CliError> {
    let kinds: Vec<ModelKind> = match args.model.as_str() {
        "all" => ModelKind::ALL.to_vec(),
        list => {
            let mut kinds = Vec::new();
            for name in list.split(',') {
                let kind: ModelKind = name.trim().parse().map_err(CliError::Config)?;
                if !kinds.contains(&kind) {
                    kinds.push(kind);
                }
            }
            kinds.sort();
            kinds
        }
    };
    let bad = |msg: &str| Err(CliError::Config(msg.into()));
    if !(args.lr_rate > 0.0 && args.lr_rate.is_finite()) || args.lr_epochs == 0 || !(args.lr_l2 >= 0.0) {
        return bad("logistic settings need --lr-rate > 0, --lr-epochs > 0, --lr-l2 >= 0");
    }
    if !(args.svm_lambda > 0.0 && args.svm_lambda.is_finite()) || args.svm_epochs == 0 {
        return bad("SVM settings need --svm-lambda > 0 and --svm-epochs > 0");
    }
    if args.rf_trees == 0 || args.rf_min_leaf == 0 || args.rf_max_features == Some(0) {
        return bad("forest settings need --rf-trees, --rf-min-leaf and --rf-max-features >= 1");
    }
    Ok(kinds
        .into_iter()
        .map(|kind| {
            let seed = derive_seed(seed, kind.flag());
            match kind {
                ModelKind::Logistic => ModelSpec::Logistic(LogisticConfig {
                    learning_rate: args.lr_rate,
                    epochs: args.lr_epochs,
                    l2: args.lr_l2,
                    seed,
                    ..LogisticConfig::default()
                }),
                ModelKind::Svm => ModelSpec::Svm(SvmConfig {
                    lambda: args.svm_lambda,
                    epochs: args.svm_epochs,
                    seed,
                }),
                ModelKind::Forest => ModelSpec::Forest(ForestConfig {
                    n_trees: args.rf_trees,
                    max_depth: (args.rf_max_depth > 0).then_some(args.rf_max_depth),
                    min_samples_leaf: args.rf_min_leaf,
                    max_features: args.rf_max_features,
                    bootstrap: true,
                    seed,
                }),
            }
        })
        .collect())
}

pub fn parse_strategy(s: &str) -> Result<Strategy, CliError> {
    s.parse().map_err(|e: liqlab_core::eval::EvalError| CliError::Config(e.to_string()))
}

pub fn parse_time(s: &str) -> Result<NaiveTime, CliError> {
    NaiveTime::parse_from_str(s, "%H:%M:%S")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
        .map_err(|_| CliError::Config(format!("bad time `{s}` (expected HH:MM or HH:MM:SS)")))
}

pub fn parse_tz(s: &str) -> Result<Tz, CliError> {
    s.parse()
        .map_err(|_| CliError::Config(format!("unknown timezone `{s}`")))
}

pub fn parse_metrics(list: &str) -> Result<Vec<Metric>, CliError> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: Metric = name
            .parse()
            .map_err(|e: liqlab_core::liquidity::UnknownMetric| CliError::Config(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Synth settings from an optional TOML file with flag overrides applied.
pub fn synth_config(args: &GenerateArgs, file: Option<&str>) -> Result<SynthConfig, CliError> {
    let mut config = match file {
        Some(text) => SynthConfig::from_toml(text)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(tickers) = &args.tickers {
        config.tickers = tickers.split(',').map(|t| t.trim().to_owned()).collect();
    }
    if let Some(days) = args.days {
        config.days = days;
    }
    if let Some(date) = &args.start_date {
        config.start_date = NaiveDate::parse_from_str(date, "%Y-%m-%d")
            .map_err(|_| CliError::Config(format!("bad date `{date}` (expected YYYY-MM-DD)")))?;
    }
    if let Some(tz) = &args.timezone {
        config.timezone = tz.clone();
    }
    if let Some(t) = &args.session_start {
        config.session_start = parse_time(t)?;
    }
    if let Some(t) = &args.session_end {
        config.session_end = parse_time(t)?;
    }
    if let Some(s) = args.signal_strength {
        config.signal_strength = s;
    }
    if let Some(list) = &args.signal_features {
        config.signal_features = parse_metrics(list)?;
    }
    config.validate()?;
    Ok(config)
}

/// Everything that determines a command's outputs. `--jobs` is left out:
/// results do not depend on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputRef>,
    pub out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<ModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select: Option<Strategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
}

impl RunConfig {
    pub fn new(command: &str, out: &Path) -> Self {
        Self {
            tool: "liqlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: Vec::new(),
            out: out.display().to_string(),
            seed: None,
            session: None,
            dataset: None,
            models: Vec::new(),
            select: None,
            synth: None,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("run config serializes")
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("run config serializes"))
    }

    pub fn comment(&self) -> String {
        format!("run_config={}", self.hash())
    }
}
