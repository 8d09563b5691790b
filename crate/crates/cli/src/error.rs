use std::io;
use std::path::PathBuf;

use liqlab_core::dataset::DatasetError;
use liqlab_core::eval::EvalError;
use liqlab_core::models::ModelError;
use liqlab_core::synth::SynthError;
use liqlab_core::tickdata::TickDataError;
use thiserror::Error;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const IO: i32 = 3;
    pub const DATA: i32 = 4;
    pub const TRAINING: i32 = 5;
    pub const BUDGET: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("bad input data: {0}")]
    Data(String),
    #[error("training failed: {0}")]
    Training(#[from] ModelError),
    #[error("{0}")]
    Budget(EvalError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::Data(_) => exit::DATA,
            CliError::Training(_) => exit::TRAINING,
            CliError::Budget(_) => exit::BUDGET,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<TickDataError> for CliError {
    fn from(e: TickDataError) -> Self {
        match e {
            TickDataError::InvalidSession { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::BadSplit(_) | DatasetError::NoFeatures => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::BudgetExceeded { .. } => CliError::Budget(e),
            EvalError::BadStrategy(_) => CliError::Config(e.to_string()),
            EvalError::Model(m) => CliError::Training(m),
            EvalError::Io(source) => CliError::Io { path: "report output".into(), source },
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Config(e.to_string())
    }
}
