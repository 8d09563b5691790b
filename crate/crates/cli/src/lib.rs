//! The `liqlab` command-line tool.
//!
//! Stages hand over through files in an output directory:
//!
//! | command    | reads                                        | writes |
//! |------------|----------------------------------------------|--------|
//! | `generate` | optional synth TOML                          | tape CSV, `<tape>.json` |
//! | `features` | tape CSV                                     | `features.csv`, `buckets.csv`, `ingest.json` |
//! | `train`    | features directory                           | `dataset.csv`, `standardization.json`, `model_<lr,svm,rf>.json`, `train.json` |
//! | `evaluate` | train directory                              | `report.json`, `results.csv`, `importance_<log,svm,rf>.svg` |
//! | `select`   | train directory                              | as `evaluate`, plus `selection.json` |
//! | `run`      | tape CSV                                     | all of the above |
//!
//! Every artifact carries the SHA-256 of its run configuration, either as
//! a leading `# run_config=<hash>` line (CSV) or a `run_config_hash` field
//! (JSON, SVG comment).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;

use clap::Parser;

pub use args::{Cli, Command};
pub use error::{exit, CliError};

/// Runs a parsed command line on a thread pool bounded by `--jobs`.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    match cli.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Features(a) => commands::features(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Select(a) => commands::select(a),
        Command::Run(a) => commands::run(a),
    })
}

/// Parses arguments, runs, and maps the outcome to a process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("LIQLAB_LOG", level)).try_init();
    match execute(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("liqlab: {e}");
            e.exit_code()
        }
    }
}
