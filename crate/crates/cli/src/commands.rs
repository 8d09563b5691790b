//! Subcommand implementations. Each stage reads its inputs fully, checks
//! its configuration before doing any work, and writes every artifact
//! atomically.

use std::fs;
use std::path::{Path, PathBuf};

use liqlab_core::artifact::write_atomic;
use liqlab_core::dataset::{drop_masked, read_dataset, split, write_dataset};
use liqlab_core::eval::{
    confusion, render_report, select_subset, Evaluation, EvaluationReport, ModelReport, Selection, Strategy,
    SubsetEvaluation,
};
use liqlab_core::liquidity::{read_features, write_features};
use liqlab_core::models::{Model, ModelDocument};
use liqlab_core::sampler::{read_buckets, write_buckets};
use liqlab_core::tickdata::{parse_tape, write_tape, IngestReport};
use liqlab_core::{build_features, synth, FeatureTable, Metric, ModelKind, ModelSpec, Part, SplitDataset, Standardizer};
use serde::Serialize;
use serde_json::json;

use crate::args::{EvaluateArgs, FeaturesArgs, GenerateArgs, RunArgs, SelectArgs, TrainArgs};
use crate::config::{model_specs, parse_strategy, synth_config, DatasetConfig, InputRef, RunConfig, SessionConfig};
use crate::error::CliError;

pub const FEATURES_FILE: &str = "features.csv";
pub const BUCKETS_FILE: &str = "buckets.csv";
pub const INGEST_FILE: &str = "ingest.json";
pub const DATASET_FILE: &str = "dataset.csv";
pub const STANDARDIZATION_FILE: &str = "standardization.json";
pub const TRAIN_FILE: &str = "train.json";
pub const SELECTION_FILE: &str = "selection.json";

pub fn model_file(kind: ModelKind) -> String {
    format!("model_{}.json", kind.flag())
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(CliError::io(path))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(CliError::io(path))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

fn json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    bytes
}

// ---------------------------------------------------------------- generate

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => Some((path, read(path)?)),
        None => None,
    };
    let text = match &file {
        Some((path, bytes)) => Some(
            std::str::from_utf8(bytes)
                .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?,
        ),
        None => None,
    };
    let config = synth_config(args, text)?;
    let mut rc = RunConfig::new("generate", &args.out);
    if let Some((path, bytes)) = &file {
        rc.inputs.push(InputRef::new(path, bytes));
    }
    rc.seed = Some(config.seed);
    rc.synth = Some(config.clone());

    let records = synth::generate(&config)?;
    let mut tape = Vec::new();
    write_tape(&mut tape, &records)?;
    write(&args.out, &tape)?;
    // The tape format has no comment syntax, so provenance goes alongside.
    let sidecar = sidecar_path(&args.out);
    let meta = json!({
        "run_config_hash": rc.hash(),
        "run_config": rc.to_json(),
        "records": records.len(),
        "tape_sha256": liqlab_core::artifact::sha256_hex(&tape),
    });
    write(&sidecar, &json_bytes(&meta))?;
    println!("generate: {} records -> {}", records.len(), args.out.display());
    Ok(())
}

/// `<tape>.json` next to a generated tape.
pub fn sidecar_path(tape: &Path) -> PathBuf {
    let mut name = tape.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    tape.with_file_name(name)
}

// ---------------------------------------------------------------- features

pub struct FeatureStage {
    pub table: FeatureTable,
    pub ingest: IngestReport,
}

pub fn feature_stage(tape: &[u8], session: &SessionConfig) -> Result<FeatureStage, CliError> {
    let (records, ingest) = parse_tape(tape)?;
    if ingest.rejected() > 0 {
        log::warn!(
            "{} rows rejected ({} malformed, {} crossed)",
            ingest.rejected(),
            ingest.rejected_malformed,
            ingest.rejected_crossed
        );
    }
    let table = build_features(records, &session.window()?, session.tz()?)?;
    Ok(FeatureStage { table, ingest })
}

fn write_feature_outputs(out: &Path, rc: &RunConfig, stage: &FeatureStage) -> Result<(), CliError> {
    create_dir(out)?;
    let comment = rc.comment();
    let mut buf = Vec::new();
    write_features(&mut buf, &stage.table.features, Some(&comment)).map_err(|e| CliError::Data(e.to_string()))?;
    write(&out.join(FEATURES_FILE), &buf)?;
    let mut buf = Vec::new();
    write_buckets(&mut buf, &stage.table.buckets, Some(&comment)).map_err(|e| CliError::Data(e.to_string()))?;
    write(&out.join(BUCKETS_FILE), &buf)?;
    let ingest = json!({
        "run_config_hash": rc.hash(),
        "run_config": rc.to_json(),
        "ingest": stage.ingest,
        "buckets": stage.table.len(),
    });
    write(&out.join(INGEST_FILE), &json_bytes(&ingest))
}

pub fn features(args: &FeaturesArgs) -> Result<(), CliError> {
    let session = SessionConfig::from_args(&args.session)?;
    let tape = read(&args.input)?;
    let mut rc = RunConfig::new("features", &args.out);
    rc.inputs.push(InputRef::new(&args.input, &tape));
    rc.session = Some(session.clone());
    let stage = feature_stage(&tape, &session)?;
    write_feature_outputs(&args.out, &rc, &stage)?;
    println!(
        "features: {} records ({} rejected) -> {} buckets in {}",
        stage.ingest.accepted,
        stage.ingest.rejected(),
        stage.table.len(),
        args.out.display()
    );
    Ok(())
}

// ------------------------------------------------------------------- train

pub struct TrainStage {
    pub data: SplitDataset,
    pub dropped_masked: usize,
    pub models: Vec<(ModelSpec, Model)>,
}

pub fn train_stage(table: &FeatureTable, dataset: &DatasetConfig, specs: &[ModelSpec]) -> Result<TrainStage, CliError> {
    let rows = table.labeled_rows()?;
    let (rows, dropped_masked) = drop_masked(rows, &dataset.features);
    if dropped_masked > 0 {
        log::info!("dropped {dropped_masked} rows with masked active metrics");
    }
    let data = split(rows, &dataset.features, dataset.split, dataset.split_mode)?;
    let train = data.samples(Part::Train);
    let mut models = Vec::with_capacity(specs.len());
    for spec in specs {
        log::info!("training {}", spec.kind());
        models.push((*spec, spec.fit(&train)?));
    }
    Ok(TrainStage {
        data,
        dropped_masked,
        models,
    })
}

fn write_train_outputs(out: &Path, rc: &RunConfig, stage: &TrainStage) -> Result<(), CliError> {
    create_dir(out)?;
    let hash = rc.hash();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &stage.data, Some(&rc.comment()))?;
    write(&out.join(DATASET_FILE), &buf)?;
    let standardizer = &stage.data.standardizer;
    let fingerprint = standardizer.fingerprint();
    write(
        &out.join(STANDARDIZATION_FILE),
        &json_bytes(&json!({
            "run_config_hash": hash,
            "fingerprint": fingerprint,
            "standardizer": standardizer,
        })),
    )?;
    for (spec, model) in &stage.models {
        let doc = ModelDocument::new(
            model.clone(),
            standardizer.features.clone(),
            spec.seed(),
            fingerprint.clone(),
            hash.clone(),
        );
        write(&out.join(model_file(spec.kind())), doc.to_json().as_bytes())?;
    }
    let sizes = [Part::Train, Part::Validation, Part::Test].map(|p| stage.data.range(p).len());
    write(
        &out.join(TRAIN_FILE),
        &json_bytes(&json!({
            "run_config_hash": hash,
            "run_config": rc.to_json(),
            "rows": stage.data.rows.len(),
            "dropped_masked": stage.dropped_masked,
            "train": sizes[0],
            "validation": sizes[1],
            "test": sizes[2],
        })),
    )
}

fn read_feature_dir(dir: &Path, rc: &mut RunConfig) -> Result<FeatureTable, CliError> {
    let features_path = dir.join(FEATURES_FILE);
    let buckets_path = dir.join(BUCKETS_FILE);
    let features = read(&features_path)?;
    let buckets = read(&buckets_path)?;
    rc.inputs.push(InputRef::new(&features_path, &features));
    rc.inputs.push(InputRef::new(&buckets_path, &buckets));
    Ok(FeatureTable {
        features: read_features(features.as_slice()).map_err(|e| CliError::Data(format!("{FEATURES_FILE}: {e}")))?,
        buckets: read_buckets(buckets.as_slice()).map_err(|e| CliError::Data(format!("{BUCKETS_FILE}: {e}")))?,
    })
}

fn print_split(stage: &TrainStage, out: &Path) {
    let sizes = [Part::Train, Part::Validation, Part::Test].map(|p| stage.data.range(p).len());
    println!(
        "train: {} rows ({} dropped as masked), split {}/{}/{}, {} model(s) -> {}",
        stage.data.rows.len(),
        stage.dropped_masked,
        sizes[0],
        sizes[1],
        sizes[2],
        stage.models.len(),
        out.display()
    );
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let dataset = DatasetConfig::from_args(&args.dataset, args.seed)?;
    let specs = model_specs(&args.models, args.seed)?;
    let mut rc = RunConfig::new("train", &args.out);
    rc.seed = Some(args.seed);
    let table = read_feature_dir(&args.input, &mut rc)?;
    rc.dataset = Some(dataset.clone());
    rc.models = specs.clone();
    let stage = train_stage(&table, &dataset, &specs)?;
    write_train_outputs(&args.out, &rc, &stage)?;
    print_split(&stage, &args.out);
    Ok(())
}

// ---------------------------------------------------------------- evaluate

/// Per-model reports and, with a strategy, the chosen subsets.
pub type Evaluated = (Vec<ModelReport>, Vec<(ModelKind, Selection)>);

/// Scores each model on the test slice. With a strategy, also selects a
/// subset on train/validation, refits on it and scores that on test.
pub fn evaluate_models(
    data: &SplitDataset,
    models: &[(ModelSpec, Model)],
    strategy: Option<Strategy>,
) -> Result<Evaluated, CliError> {
    let features = data.features().to_vec();
    let test = data.samples(Part::Test);
    let (train, validation) = match strategy {
        Some(_) => (data.samples(Part::Train), data.samples(Part::Validation)),
        None => Default::default(),
    };
    let mut reports = Vec::new();
    let mut selections = Vec::new();
    for (spec, model) in models {
        let predicted = model.predict_all(&test)?;
        let all_features = Evaluation::new(
            features.clone(),
            confusion(&test.y, &predicted)?,
            &model.feature_importance(),
        )?;
        let feature_combination = match strategy {
            Some(strategy) => {
                let selection = select_subset(spec, &train, &validation, strategy)?;
                let refit = spec.fit(&train.select_columns(&selection.features))?;
                let test_subset = test.select_columns(&selection.features);
                let predicted = refit.predict_all(&test_subset)?;
                let names: Vec<Metric> = selection.features.iter().map(|&i| features[i]).collect();
                let evaluation = Evaluation::new(names, confusion(&test.y, &predicted)?, &refit.feature_importance())?;
                let subset = SubsetEvaluation {
                    strategy: strategy.to_string(),
                    validation_accuracy: selection.validation_accuracy,
                    evaluation,
                };
                selections.push((spec.kind(), selection));
                Some(subset)
            }
            None => None,
        };
        reports.push(ModelReport {
            model: spec.kind(),
            label: spec.kind().label().into(),
            seed: spec.seed(),
            spec: *spec,
            all_features,
            feature_combination,
        });
    }
    Ok((reports, selections))
}

fn write_reports(
    out: &Path,
    rc: &RunConfig,
    data: &SplitDataset,
    models: Vec<ModelReport>,
    selections: &[(ModelKind, Selection)],
) -> Result<EvaluationReport, CliError> {
    create_dir(out)?;
    let test_rows = data.range(Part::Test).len() as u64;
    let report = EvaluationReport::new(rc.hash(), rc.to_json(), test_rows, models);
    render_report(&report, out)?;
    if rc.select.is_some() {
        let features = data.features();
        let entries: Vec<_> = selections
            .iter()
            .map(|(kind, s)| {
                let names = |cols: &[usize]| cols.iter().map(|&i| features[i]).collect::<Vec<_>>();
                json!({
                    "model": kind,
                    "strategy": s.strategy.to_string(),
                    "features": names(&s.features),
                    "validation_accuracy": s.validation_accuracy,
                    "steps": s.steps.iter().map(|step| json!({
                        "features": names(&step.features),
                        "correct": step.correct,
                        "validation_accuracy": step.validation_accuracy,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        write(
            &out.join(SELECTION_FILE),
            &json_bytes(&json!({ "run_config_hash": rc.hash(), "selections": entries })),
        )?;
    }
    Ok(report)
}

fn print_report(report: &EvaluationReport, out: &Path) {
    for m in &report.models {
        let fc = m
            .feature_combination
            .as_ref()
            .map(|s| format!(", subset {} {}", s.evaluation.confusion, s.evaluation.accuracy_percent))
            .unwrap_or_default();
        println!(
            "{}: all features {} {}{}",
            m.label, m.all_features.confusion, m.all_features.accuracy_percent, fc
        );
    }
    println!("report -> {}", out.display());
}

/// Loads `dataset.csv`, the standardization and every model found in a
/// train directory, checking that they belong together.
fn read_train_dir(dir: &Path, rc: &mut RunConfig) -> Result<(SplitDataset, Vec<(ModelSpec, Model)>), CliError> {
    let std_path = dir.join(STANDARDIZATION_FILE);
    let std_bytes = read(&std_path)?;
    rc.inputs.push(InputRef::new(&std_path, &std_bytes));
    let doc: serde_json::Value =
        serde_json::from_slice(&std_bytes).map_err(|e| CliError::Data(format!("{STANDARDIZATION_FILE}: {e}")))?;
    let standardizer: Standardizer = serde_json::from_value(doc["standardizer"].clone())
        .map_err(|e| CliError::Data(format!("{STANDARDIZATION_FILE}: {e}")))?;
    let fingerprint = standardizer.fingerprint();

    let data_path = dir.join(DATASET_FILE);
    let data_bytes = read(&data_path)?;
    rc.inputs.push(InputRef::new(&data_path, &data_bytes));
    let data = read_dataset(data_bytes.as_slice(), standardizer)?;

    let mut models = Vec::new();
    for kind in ModelKind::ALL {
        let path = dir.join(model_file(kind));
        if !path.exists() {
            continue;
        }
        let bytes = read(&path)?;
        rc.inputs.push(InputRef::new(&path, &bytes));
        let text = String::from_utf8(bytes).map_err(|_| CliError::Data(format!("{} is not UTF-8", path.display())))?;
        let doc = ModelDocument::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if doc.standardization_hash != fingerprint || doc.features != data.features() {
            return Err(CliError::Data(format!(
                "{} was trained under a different standardization",
                path.display()
            )));
        }
        models.push((doc.model.spec(), doc.model));
    }
    if models.is_empty() {
        return Err(CliError::Data(format!("no model files in {}", dir.display())));
    }
    Ok((data, models))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let mut rc = RunConfig::new("evaluate", &args.out);
    let (data, models) = read_train_dir(&args.input, &mut rc)?;
    rc.models = models.iter().map(|(s, _)| *s).collect();
    let (reports, _) = evaluate_models(&data, &models, None)?;
    let report = write_reports(&args.out, &rc, &data, reports, &[])?;
    print_report(&report, &args.out);
    Ok(())
}

pub fn select(args: &SelectArgs) -> Result<(), CliError> {
    let strategy = parse_strategy(&args.select)?;
    let mut rc = RunConfig::new("select", &args.out);
    rc.select = Some(strategy);
    let (data, models) = read_train_dir(&args.input, &mut rc)?;
    rc.models = models.iter().map(|(s, _)| *s).collect();
    let (reports, selections) = evaluate_models(&data, &models, Some(strategy))?;
    let report = write_reports(&args.out, &rc, &data, reports, &selections)?;
    print_report(&report, &args.out);
    Ok(())
}

// --------------------------------------------------------------------- run

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let session = SessionConfig::from_args(&args.session)?;
    let dataset = DatasetConfig::from_args(&args.dataset, args.seed)?;
    let specs = model_specs(&args.models, args.seed)?;
    let strategy = args.select.as_deref().map(parse_strategy).transpose()?;
    let tape = read(&args.input)?;
    let mut rc = RunConfig::new("run", &args.out);
    rc.inputs.push(InputRef::new(&args.input, &tape));
    rc.seed = Some(args.seed);
    rc.session = Some(session.clone());
    rc.dataset = Some(dataset.clone());
    rc.models = specs.clone();
    rc.select = strategy;

    let features = feature_stage(&tape, &session)?;
    write_feature_outputs(&args.out, &rc, &features)?;
    println!(
        "features: {} records ({} rejected) -> {} buckets",
        features.ingest.accepted,
        features.ingest.rejected(),
        features.table.len()
    );
    let trained = train_stage(&features.table, &dataset, &specs)?;
    write_train_outputs(&args.out, &rc, &trained)?;
    print_split(&trained, &args.out);
    let (reports, selections) = evaluate_models(&trained.data, &trained.models, strategy)?;
    let report = write_reports(&args.out, &rc, &trained.data, reports, &selections)?;
    print_report(&report, &args.out);
    Ok(())
}
