//! Confusion matrices, accuracy, feature-subset selection and report
//! rendering.

mod report;
mod select;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Direction;
use crate::models::ModelError;

pub use report::{
    importance_svg, render_report, report_json, results_table_csv, validate_report, Evaluation,
    EvaluationReport, FeatureImportance, ModelReport, SubsetEvaluation, REPORT_SCHEMA,
    REPORT_VERSION,
};
pub use select::{select_subset, subset_budget, Selection, SelectionStep, Strategy, MAX_EXHAUSTIVE_SUBSETS};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label sequences differ in length: {actual} actual vs {predicted} predicted")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("exhaustive search over {candidates} subsets exceeds the budget of {budget}")]
    BudgetExceeded { candidates: u128, budget: u128 },
    #[error("bad selection strategy `{0}` (expected forward, topk:<k> or exhaustive:<k>)")]
    BadStrategy(String),
    #[error("selection needs non-empty train and validation slices")]
    EmptySlice,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// 2x2 counts, rows = actual, columns = predicted, Up first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub up_up: u64,
    pub up_down: u64,
    pub down_up: u64,
    pub down_down: u64,
}

impl ConfusionMatrix {
    pub fn from_rows(rows: [[u64; 2]; 2]) -> Self {
        Self {
            up_up: rows[0][0],
            up_down: rows[0][1],
            down_up: rows[1][0],
            down_down: rows[1][1],
        }
    }

    pub fn rows(&self) -> [[u64; 2]; 2] {
        [[self.up_up, self.up_down], [self.down_up, self.down_down]]
    }

    pub fn total(&self) -> u64 {
        self.up_up + self.up_down + self.down_up + self.down_down
    }

    pub fn correct(&self) -> u64 {
        self.up_up + self.down_down
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{},{}],[{},{}]]",
            self.up_up, self.up_down, self.down_up, self.down_down
        )
    }
}

pub fn confusion(actual: &[Direction], predicted: &[Direction]) -> Result<ConfusionMatrix, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (a, p) in actual.iter().zip(predicted) {
        match (a, p) {
            (Direction::Up, Direction::Up) => cm.up_up += 1,
            (Direction::Up, Direction::Down) => cm.up_down += 1,
            (Direction::Down, Direction::Up) => cm.down_up += 1,
            (Direction::Down, Direction::Down) => cm.down_down += 1,
        }
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    match cm.total() {
        0 => Err(EvalError::EmptyMatrix),
        total => Ok(cm.correct() as f64 / total as f64),
    }
}

/// Accuracy as a percentage with two decimals, truncated rather than
/// rounded (`32/51` prints as `62.74%`). Computed in integer arithmetic.
pub fn accuracy_percent(cm: &ConfusionMatrix) -> Result<String, EvalError> {
    let total = u128::from(cm.total());
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let basis_points = u128::from(cm.correct()) * 10_000 / total;
    Ok(format!("{}.{:02}%", basis_points / 100, basis_points % 100))
}
