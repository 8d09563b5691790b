//! Evaluation report: JSON document, results table and importance charts.
//!
//! JSON schema (`liqlab-report`, version 1):
//!
//! ```text
//! {
//!   "schema": "liqlab-report", "version": 1,
//!   "run_config_hash": string, "run_config": object,
//!   "test_rows": integer,
//!   "models": [{
//!     "model": "logistic" | "svm" | "forest", "label": "LOG" | "SVM" | "RF",
//!     "seed": integer, "spec": object,
//!     "all_features": Evaluation,
//!     "feature_combination": null | {
//!        "strategy": string, "validation_accuracy": number, "evaluation": Evaluation }
//!   }]
//! }
//! Evaluation = { "features": [metric], "confusion": {"up_up","up_down","down_up","down_down": integer},
//!                "accuracy": number, "accuracy_percent": string,
//!                "importances": [{"feature": metric, "importance": number}] }
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{accuracy, accuracy_percent, ConfusionMatrix, EvalError};
use crate::artifact::write_atomic;
use crate::liquidity::Metric;
use crate::models::{ModelKind, ModelSpec};

pub const REPORT_SCHEMA: &str = "liqlab-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: Metric,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub features: Vec<Metric>,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub accuracy_percent: String,
    pub importances: Vec<FeatureImportance>,
}

impl Evaluation {
    pub fn new(features: Vec<Metric>, confusion: ConfusionMatrix, importances: &[f64]) -> Result<Self, EvalError> {
        Ok(Self {
            accuracy: accuracy(&confusion)?,
            accuracy_percent: accuracy_percent(&confusion)?,
            importances: features
                .iter()
                .zip(importances)
                .map(|(&feature, &importance)| FeatureImportance { feature, importance })
                .collect(),
            features,
            confusion,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetEvaluation {
    pub strategy: String,
    pub validation_accuracy: f64,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelKind,
    pub label: String,
    pub seed: u64,
    pub spec: ModelSpec,
    pub all_features: Evaluation,
    pub feature_combination: Option<SubsetEvaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema: String,
    pub version: u32,
    pub run_config_hash: String,
    pub run_config: Value,
    pub test_rows: u64,
    pub models: Vec<ModelReport>,
}

impl EvaluationReport {
    pub fn new(run_config_hash: String, run_config: Value, test_rows: u64, models: Vec<ModelReport>) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            version: REPORT_VERSION,
            run_config_hash,
            run_config,
            test_rows,
            models,
        }
    }
}

pub fn report_json(report: &EvaluationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Results table: one row per model with the all-features and
/// feature-combination confusion matrices and accuracies.
pub fn results_table_csv(report: &EvaluationReport) -> String {
    let mut out = format!("# run_config={}\n", report.run_config_hash);
    out.push_str("Model,All Features,Accuracy_AF,Feature Combination,Accuracy_FC\n");
    for m in &report.models {
        let (fc, fc_acc) = match &m.feature_combination {
            Some(s) => (s.evaluation.confusion.to_string(), s.evaluation.accuracy_percent.clone()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},\"{}\",{},\"{}\",{}",
            m.label, m.all_features.confusion, m.all_features.accuracy_percent, fc, fc_acc
        );
    }
    out
}

const CHART_HEIGHT: f64 = 300.0;
const BAR_WIDTH: f64 = 24.0;
const BAR_GAP: f64 = 8.0;
const MARGIN: f64 = 40.0;
const LABEL_SPACE: f64 = 140.0;

/// Vertical bar chart of one model's importances. Bar heights are
/// proportional to importance; the tallest bar spans the chart height.
pub fn importance_svg(title: &str, importances: &[FeatureImportance], run_config_hash: &str) -> String {
    let max = importances
        .iter()
        .map(|f| f.importance)
        .fold(0.0f64, f64::max);
    let n = importances.len() as f64;
    let width = 2.0 * MARGIN + n * (BAR_WIDTH + BAR_GAP);
    let height = 2.0 * MARGIN + CHART_HEIGHT + LABEL_SPACE;
    let base = MARGIN + CHART_HEIGHT;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(svg, "<!-- run_config={run_config_hash} -->");
    let _ = writeln!(
        svg,
        "<text x=\"{MARGIN}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"14\">{} feature importance</text>",
        MARGIN / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN}\" y1=\"{base}\" x2=\"{:.1}\" y2=\"{base}\" stroke=\"black\"/>",
        width - MARGIN
    );
    for (i, f) in importances.iter().enumerate() {
        let h = if max > 0.0 { f.importance / max * CHART_HEIGHT } else { 0.0 };
        let x = MARGIN + i as f64 * (BAR_WIDTH + BAR_GAP) + BAR_GAP / 2.0;
        let _ = writeln!(
            svg,
            "<rect class=\"bar\" data-feature=\"{name}\" data-importance=\"{imp}\" x=\"{x:.4}\" y=\"{y:.4}\" width=\"{BAR_WIDTH}\" height=\"{h:.4}\" fill=\"#4a7ab5\"/>",
            name = f.feature.name(),
            imp = f.importance,
            y = base - h,
        );
        let lx = x + BAR_WIDTH / 2.0;
        let ly = base + 8.0;
        let _ = writeln!(
            svg,
            "<text x=\"{lx:.4}\" y=\"{ly:.4}\" font-family=\"sans-serif\" font-size=\"10\" transform=\"rotate(90 {lx:.4} {ly:.4})\">{}</text>",
            f.feature.name()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `report.json`, `results.csv` and one `importance_<label>.svg`
/// per model (all-features importances) into `dir`. Returns the paths.
pub fn render_report(report: &EvaluationReport, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join("report.json");
    write_atomic(&json, report_json(report).as_bytes())?;
    written.push(json);
    let table = dir.join("results.csv");
    write_atomic(&table, results_table_csv(report).as_bytes())?;
    written.push(table);
    for m in &report.models {
        let path = dir.join(format!("importance_{}.svg", m.label.to_lowercase()));
        let svg = importance_svg(&m.label, &m.all_features.importances, &report.run_config_hash);
        write_atomic(&path, svg.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Structural check of a report document against the version-1 schema,
/// including internal consistency (accuracy agrees with the confusion
/// counts, importances sum to 1). Returns every violation found.
pub fn validate_report(doc: &Value) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();
    let mut err = |path: &str, msg: &str| errors.push(format!("{path}: {msg}"));

    if doc.get("schema").and_then(Value::as_str) != Some(REPORT_SCHEMA) {
        err("schema", "must be \"liqlab-report\"");
    }
    if doc.get("version").and_then(Value::as_u64) != Some(u64::from(REPORT_VERSION)) {
        err("version", "must be 1");
    }
    if !doc.get("run_config_hash").is_some_and(Value::is_string) {
        err("run_config_hash", "must be a string");
    }
    if !doc.get("run_config").is_some_and(Value::is_object) {
        err("run_config", "must be an object");
    }
    let test_rows = doc.get("test_rows").and_then(Value::as_u64);
    if test_rows.is_none() {
        err("test_rows", "must be a non-negative integer");
    }
    let Some(models) = doc.get("models").and_then(Value::as_array) else {
        err("models", "must be an array");
        return Err(errors);
    };
    if models.is_empty() {
        err("models", "must not be empty");
    }
    for (i, m) in models.iter().enumerate() {
        let p = format!("models[{i}]");
        let kind = m.get("model").and_then(Value::as_str);
        let label = m.get("label").and_then(Value::as_str);
        match (kind, label) {
            (Some("logistic"), Some("LOG")) | (Some("svm"), Some("SVM")) | (Some("forest"), Some("RF")) => {}
            _ => err(&p, "model/label must be logistic/LOG, svm/SVM or forest/RF"),
        }
        if m.get("seed").and_then(Value::as_u64).is_none() {
            err(&format!("{p}.seed"), "must be a non-negative integer");
        }
        if !m.get("spec").is_some_and(Value::is_object) {
            err(&format!("{p}.spec"), "must be an object");
        }
        match m.get("all_features") {
            Some(e) => check_evaluation(e, &format!("{p}.all_features"), test_rows, &mut err),
            None => err(&p, "missing all_features"),
        }
        match m.get("feature_combination") {
            None | Some(Value::Null) => {}
            Some(fc) => {
                let fp = format!("{p}.feature_combination");
                if !fc.get("strategy").is_some_and(Value::is_string) {
                    err(&fp, "strategy must be a string");
                }
                if !fc
                    .get("validation_accuracy")
                    .and_then(Value::as_f64)
                    .is_some_and(|a| (0.0..=1.0).contains(&a))
                {
                    err(&fp, "validation_accuracy must be in [0, 1]");
                }
                match fc.get("evaluation") {
                    Some(e) => check_evaluation(e, &format!("{fp}.evaluation"), test_rows, &mut err),
                    None => err(&fp, "missing evaluation"),
                }
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

fn check_evaluation(e: &Value, p: &str, test_rows: Option<u64>, err: &mut impl FnMut(&str, &str)) {
    let features: Option<Vec<&str>> = e
        .get("features")
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(Value::as_str).collect());
    match &features {
        Some(f) if !f.is_empty() && f.iter().all(|n| n.parse::<Metric>().is_ok()) => {}
        _ => err(p, "features must be a non-empty array of metric names"),
    }
    let cells: Option<Vec<u64>> = e.get("confusion").and_then(|c| {
        ["up_up", "up_down", "down_up", "down_down"]
            .iter()
            .map(|k| c.get(*k).and_then(Value::as_u64))
            .collect()
    });
    let Some(cells) = cells else {
        err(p, "confusion must hold four non-negative integer cells");
        return;
    };
    let cm = ConfusionMatrix::from_rows([[cells[0], cells[1]], [cells[2], cells[3]]]);
    if let Some(n) = test_rows {
        if cm.total() != n {
            err(p, "confusion total differs from test_rows");
        }
    }
    match (accuracy(&cm), e.get("accuracy").and_then(Value::as_f64)) {
        (Ok(expected), Some(a)) if a == expected => {}
        _ => err(p, "accuracy must equal (up_up + down_down) / total"),
    }
    match (accuracy_percent(&cm), e.get("accuracy_percent").and_then(Value::as_str)) {
        (Ok(expected), Some(a)) if a == expected => {}
        _ => err(p, "accuracy_percent disagrees with the confusion counts"),
    }
    let importances: Option<Vec<(&str, f64)>> = e.get("importances").and_then(Value::as_array).and_then(|a| {
        a.iter()
            .map(|x| Some((x.get("feature")?.as_str()?, x.get("importance")?.as_f64()?)))
            .collect()
    });
    match importances {
        Some(imp) => {
            let names: Vec<&str> = imp.iter().map(|x| x.0).collect();
            if features.as_ref().is_some_and(|f| *f != names) {
                err(p, "importances must list the evaluation features in order");
            }
            if imp.iter().any(|x| !(x.1 >= 0.0)) || (imp.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() > 1e-9 {
                err(p, "importances must be non-negative and sum to 1");
            }
        }
        None => err(p, "importances must be an array of {feature, importance}"),
    }
}
