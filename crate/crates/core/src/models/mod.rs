//! Direction classifiers: logistic regression, linear SVM and random forest.

pub mod forest;
pub mod linear;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Direction, Samples};
use crate::liquidity::Metric;

pub use forest::{train_forest, ForestConfig, ForestModel};
pub use linear::{
    train_logistic, train_svm, LinearKind, LinearModel, LogisticConfig, SvmConfig, WeightInit,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("loss became non-finite at epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("unsupported model document: {0}")]
    Format(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Svm,
    Forest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logistic, ModelKind::Svm, ModelKind::Forest];

    /// Short flag name: `lr`, `svm`, `rf`.
    pub fn flag(self) -> &'static str {
        match self {
            ModelKind::Logistic => "lr",
            ModelKind::Svm => "svm",
            ModelKind::Forest => "rf",
        }
    }

    /// Row label used in results tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Logistic => "LOG",
            ModelKind::Svm => "SVM",
            ModelKind::Forest => "RF",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.flag())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.flag() == s)
            .ok_or_else(|| format!("unknown model `{s}` (expected lr, svm or rf)"))
    }
}

/// A model kind together with its training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Logistic(LogisticConfig),
    Svm(SvmConfig),
    Forest(ForestConfig),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Logistic(_) => ModelKind::Logistic,
            ModelSpec::Svm(_) => ModelKind::Svm,
            ModelSpec::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Logistic => ModelSpec::Logistic(LogisticConfig::default()),
            ModelKind::Svm => ModelSpec::Svm(SvmConfig::default()),
            ModelKind::Forest => ModelSpec::Forest(ForestConfig::default()),
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ModelSpec::Logistic(c) => ModelSpec::Logistic(LogisticConfig { seed, ..c }),
            ModelSpec::Svm(c) => ModelSpec::Svm(SvmConfig { seed, ..c }),
            ModelSpec::Forest(c) => ModelSpec::Forest(ForestConfig { seed, ..c }),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelSpec::Logistic(c) => c.seed,
            ModelSpec::Svm(c) => c.seed,
            ModelSpec::Forest(c) => c.seed,
        }
    }

    pub fn fit(&self, data: &Samples) -> Result<Model, ModelError> {
        Ok(match self {
            ModelSpec::Logistic(c) => Model::Linear(train_logistic(data, c)?),
            ModelSpec::Svm(c) => Model::Linear(train_svm(data, c)?),
            ModelSpec::Forest(c) => Model::Forest(train_forest(data, c)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Direction,
    /// Up-ness in `[0, 1]`: sigmoid probability, calibrated SVM margin or
    /// forest vote fraction.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Forest(ForestModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Linear(m) => match m.kind {
                LinearKind::Logistic => ModelKind::Logistic,
                LinearKind::Svm => ModelKind::Svm,
            },
            Model::Forest(_) => ModelKind::Forest,
        }
    }

    /// The spec that reproduces this model when refit on the same data.
    pub fn spec(&self) -> ModelSpec {
        match self {
            Model::Linear(m) => match m.training {
                linear::LinearTraining::Logistic(c) => ModelSpec::Logistic(c),
                linear::LinearTraining::Svm(c) => ModelSpec::Svm(c),
            },
            Model::Forest(m) => ModelSpec::Forest(m.config),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.weights.len(),
            Model::Forest(m) => m.n_features,
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<Prediction, ModelError> {
        if row.len() != self.n_features() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        let (label, score) = match self {
            Model::Linear(m) => linear::predict_linear(m, row),
            Model::Forest(m) => m.predict(row),
        };
        Ok(Prediction { label, score })
    }

    pub fn predict_all(&self, data: &Samples) -> Result<Vec<Direction>, ModelError> {
        data.x
            .iter()
            .map(|row| self.predict(row).map(|p| p.label))
            .collect()
    }

    /// Non-negative importances summing to 1: normalized mean Gini decrease
    /// for forests, `|w_i| / sum |w_j|` for linear models. A model with no
    /// signal at all (zero weights, no splits) gets uniform importances.
    pub fn feature_importance(&self) -> Vec<f64> {
        let d = self.n_features();
        let computed = match self {
            Model::Linear(m) => {
                let total: f64 = m.weights.iter().map(|w| w.abs()).sum();
                (total > 0.0).then(|| m.weights.iter().map(|w| w.abs() / total).collect())
            }
            Model::Forest(m) => m.importances(),
        };
        computed.unwrap_or_else(|| {
            log::warn!("{} model has all-zero importances; reporting uniform", self.kind());
            vec![1.0 / d as f64; d]
        })
    }
}

pub const MODEL_FORMAT: &str = "liqlab-model";
pub const MODEL_VERSION: u32 = 1;

/// Versioned on-disk form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub features: Vec<Metric>,
    pub seed: u64,
    /// Fingerprint of the standardization the model was trained under.
    pub standardization_hash: String,
    pub run_config_hash: String,
    pub model: Model,
}

impl ModelDocument {
    pub fn new(
        model: Model,
        features: Vec<Metric>,
        seed: u64,
        standardization_hash: String,
        run_config_hash: String,
    ) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: model.kind(),
            features,
            seed,
            standardization_hash,
            run_config_hash,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(ModelError::Format(format!("{} v{}", doc.format, doc.version)));
        }
        if doc.model.n_features() != doc.features.len() {
            return Err(ModelError::DimensionMismatch {
                expected: doc.features.len(),
                found: doc.model.n_features(),
            });
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn planted(n: usize, d: usize, signal: usize) -> Samples {
        let mut rng = StreamRng::new(21, "test/planted");
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let y = x
            .iter()
            .map(|r| if r[signal] > 0.0 { Direction::Up } else { Direction::Down })
            .collect();
        Samples::new(x, y)
    }

    #[test]
    fn deterministic_feature_dominates_forest() {
        let train = planted(600, 5, 3);
        let test = planted(200, 5, 3);
        let spec = ModelSpec::Forest(ForestConfig { n_trees: 30, ..ForestConfig::default() });
        let model = spec.fit(&train).unwrap();
        let imp = model.feature_importance();
        assert!(imp[3] > 0.9, "{imp:?}");
        let preds = model.predict_all(&test).unwrap();
        let hits = preds.iter().zip(&test.y).filter(|(p, y)| p == y).count();
        assert_eq!(hits, test.len());
    }

    #[test]
    fn single_feature_importance_is_one() {
        let data = planted(100, 1, 0);
        for kind in ModelKind::ALL {
            let spec = match ModelSpec::default_for(kind) {
                ModelSpec::Forest(c) => ModelSpec::Forest(ForestConfig { n_trees: 5, ..c }),
                s => s,
            };
            assert_eq!(spec.fit(&data).unwrap().feature_importance(), vec![1.0], "{kind}");
        }
    }

    #[test]
    fn duplicated_column_gets_equal_linear_importance() {
        let base = planted(300, 2, 0);
        let dup = Samples::new(
            base.x.iter().map(|r| vec![r[0], r[0], r[1]]).collect(),
            base.y.clone(),
        );
        for kind in [ModelKind::Logistic, ModelKind::Svm] {
            let imp = ModelSpec::default_for(kind).fit(&dup).unwrap().feature_importance();
            assert!((imp[0] - imp[1]).abs() < 0.05, "{kind}: {imp:?}");
        }
    }

    #[test]
    fn zero_weights_give_uniform_importance() {
        let model = Model::Linear(LinearModel {
            kind: LinearKind::Svm,
            weights: vec![0.0; 4],
            bias: 0.0,
            margin_range: None,
            training: linear::LinearTraining::Svm(SvmConfig::default()),
        });
        assert_eq!(model.feature_importance(), vec![0.25; 4]);
    }

    #[test]
    fn predict_checks_dimension() {
        let model = ModelSpec::default_for(ModelKind::Logistic).fit(&planted(50, 2, 0)).unwrap();
        assert!(matches!(model.predict(&[1.0]), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn identical_trees_vote_unanimously() {
        let data = planted(200, 3, 1);
        let spec = ModelSpec::Forest(ForestConfig {
            n_trees: 1,
            bootstrap: false,
            ..ForestConfig::default()
        });
        let Model::Forest(single) = spec.fit(&data).unwrap() else { unreachable!() };
        let forest = Model::Forest(ForestModel::from_trees(vec![single.trees[0].clone(); 5], 3));
        for row in &data.x {
            let s = forest.predict(row).unwrap().score;
            assert!(s == 0.0 || s == 1.0);
        }
    }

    #[test]
    fn document_reload_is_exact() {
        let data = planted(120, 3, 0);
        for kind in ModelKind::ALL {
            let spec = match ModelSpec::default_for(kind) {
                ModelSpec::Forest(c) => ModelSpec::Forest(ForestConfig { n_trees: 4, ..c }),
                s => s,
            };
            let model = spec.fit(&data).unwrap();
            assert_eq!(model.spec(), spec);
            let doc = ModelDocument::new(
                model,
                vec![Metric::Spread, Metric::Depth, Metric::Turnover],
                spec.seed(),
                "std".into(),
                "cfg".into(),
            );
            let back = ModelDocument::from_json(&doc.to_json()).unwrap();
            assert_eq!(back, doc);
            assert_eq!(back.to_json(), doc.to_json());
        }
    }
}
