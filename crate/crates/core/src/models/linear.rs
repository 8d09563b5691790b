//! Logistic regression and linear SVM.
//!
//! Both trainers are single-threaded and deterministic. The objectives and
//! their (sub)gradients are public so they can be checked against finite
//! differences.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::dataset::{Direction, Samples};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Logistic,
    Svm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    Zeros,
    /// Normal weights with the given standard deviation, drawn from the
    /// config seed.
    Normal { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub init: WeightInit,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-3,
            init: WeightInit::Zeros,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearTraining {
    Logistic(LogisticConfig),
    Svm(SvmConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Smallest and largest training margin (SVM score calibration).
    pub margin_range: Option<(f64, f64)>,
    pub training: LinearTraining,
}

impl LinearModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn check_dims(weights: &[f64], data: &Samples) -> Result<(), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    match data.x.iter().find(|r| r.len() != weights.len()) {
        Some(r) => Err(ModelError::DimensionMismatch {
            expected: weights.len(),
            found: r.len(),
        }),
        None => Ok(()),
    }
}

/// Mean negative log-likelihood plus `(l2 / 2) * ||w||^2` (bias
/// unpenalized), with Up = 1 and Down = 0.
pub fn logistic_objective(weights: &[f64], bias: f64, data: &Samples, l2: f64) -> f64 {
    let n = data.len() as f64;
    let nll: f64 = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(row, y)| softplus(dot(weights, row) + bias) - y.indicator() * (dot(weights, row) + bias))
        .sum();
    nll / n + 0.5 * l2 * dot(weights, weights)
}

/// Gradient of [`logistic_objective`] with respect to `(w, b)`.
pub fn logistic_gradient(weights: &[f64], bias: f64, data: &Samples, l2: f64) -> (Vec<f64>, f64) {
    let n = data.len() as f64;
    let mut grad: Vec<f64> = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (row, y) in data.x.iter().zip(&data.y) {
        let residual = sigmoid(dot(weights, row) + bias) - y.indicator();
        for (g, x) in grad.iter_mut().zip(row) {
            *g += residual * x;
        }
        grad_b += residual;
    }
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (grad, grad_b / n)
}

/// Full-batch gradient descent on the L2-regularized logistic loss.
pub fn train_logistic(data: &Samples, config: &LogisticConfig) -> Result<LinearModel, ModelError> {
    let d = data.n_features();
    let mut weights = match config.init {
        WeightInit::Zeros => vec![0.0; d],
        WeightInit::Normal { scale } => {
            let mut rng = StreamRng::new(config.seed, "logistic/init");
            (0..d).map(|_| scale * rng.normal()).collect()
        }
    };
    check_dims(&weights, data)?;
    let mut bias = 0.0;
    for epoch in 0..config.epochs {
        let (grad, grad_b) = logistic_gradient(&weights, bias, data, config.l2);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * g;
        }
        bias -= config.learning_rate * grad_b;
        let loss = logistic_objective(&weights, bias, data, config.l2);
        if !loss.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
    }
    Ok(LinearModel {
        kind: LinearKind::Logistic,
        weights,
        bias,
        margin_range: None,
        training: LinearTraining::Logistic(*config),
    })
}

/// `(lambda / 2) * ||w||^2` plus the mean hinge loss, with Up = +1 and
/// Down = -1. The bias is unpenalized.
pub fn svm_objective(weights: &[f64], bias: f64, data: &Samples, lambda: f64) -> f64 {
    let n = data.len() as f64;
    let hinge: f64 = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(row, y)| (1.0 - y.sign() * (dot(weights, row) + bias)).max(0.0))
        .sum();
    0.5 * lambda * dot(weights, weights) + hinge / n
}

/// A subgradient of [`svm_objective`]; at margin exactly 1 the hinge term
/// contributes zero.
pub fn svm_subgradient(weights: &[f64], bias: f64, data: &Samples, lambda: f64) -> (Vec<f64>, f64) {
    let n = data.len() as f64;
    let mut grad: Vec<f64> = weights.iter().map(|w| lambda * w).collect();
    let mut grad_b = 0.0;
    for (row, y) in data.x.iter().zip(&data.y) {
        let s = y.sign();
        if s * (dot(weights, row) + bias) < 1.0 {
            for (g, x) in grad.iter_mut().zip(row) {
                *g -= s * x / n;
            }
            grad_b -= s / n;
        }
    }
    (grad, grad_b)
}

/// Trains the SVM; see [`train_svm_traced`].
pub fn train_svm(data: &Samples, config: &SvmConfig) -> Result<LinearModel, ModelError> {
    train_svm_traced(data, config).map(|(model, _)| model)
}

/// Epoch-based stochastic subgradient descent (Pegasos schedule).
///
/// Step `t` (1-based, counted across epochs) uses `eta = 1 / (lambda * t)`.
/// Each epoch visits the rows in a fresh permutation drawn from the seed.
/// After every step `w` is projected onto the ball of radius
/// `1 / sqrt(lambda)`, which contains the optimum. The returned model is
/// the average of the per-epoch end iterates from the second half of
/// training. Also returns the objective after every epoch.
/// Smallest minimizer of `sum_i max(0, 1 - y_i (w.x_i + b))` over `b`.
fn best_hinge_bias(weights: &[f64], data: &Samples) -> Option<f64> {
    // Breakpoints c_i = y_i - w.x_i; an Up row is active for b < c_i, a
    // Down row for b > c_i. The right derivative at c is
    // #{down: c_i <= c} - #{up: c_i > c}, which is nondecreasing.
    let mut points: Vec<(f64, bool)> = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(row, y)| (y.sign() - dot(weights, row), *y == Direction::Up))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut ups_above = points.iter().filter(|p| p.1).count() as i64;
    let mut downs_at_or_below = 0i64;
    let mut i = 0;
    while i < points.len() {
        let c = points[i].0;
        while i < points.len() && points[i].0 == c {
            if points[i].1 {
                ups_above -= 1;
            } else {
                downs_at_or_below += 1;
            }
            i += 1;
        }
        if downs_at_or_below - ups_above >= 0 {
            return Some(c);
        }
    }
    points.last().map(|p| p.0)
}

pub fn train_svm_traced(data: &Samples, config: &SvmConfig) -> Result<(LinearModel, Vec<f64>), ModelError> {
    let d = data.n_features();
    let mut weights = vec![0.0; d];
    check_dims(&weights, data)?;
    let mut bias = 0.0;
    let lambda = config.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut rng = StreamRng::new(config.seed, "svm/order");
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut avg_w = vec![0.0; d];
    let mut avg_b = 0.0;
    let mut averaged = 0usize;
    let mut t = 0u64;
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = &data.x[i];
            let y = data.y[i].sign();
            let violated = y * (dot(&weights, row) + bias) < 1.0;
            let shrink = 1.0 - eta * lambda;
            for w in weights.iter_mut() {
                *w *= shrink;
            }
            if violated {
                for (w, x) in weights.iter_mut().zip(row) {
                    *w += eta * y * x;
                }
                bias += eta * y / data.len() as f64;
            }
            let norm = dot(&weights, &weights).sqrt();
            if norm > radius {
                let scale = radius / norm;
                for w in weights.iter_mut() {
                    *w *= scale;
                }
            }
        }
        let objective = svm_objective(&weights, bias, data, lambda);
        if !objective.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        trace.push(objective);
        if 2 * (epoch + 1) > config.epochs {
            for (a, w) in avg_w.iter_mut().zip(&weights) {
                *a += w;
            }
            avg_b += bias;
            averaged += 1;
        }
    }
    if averaged > 0 {
        let k = averaged as f64;
        weights = avg_w.into_iter().map(|w| w / k).collect();
        bias = avg_b / k;
    }
    // The bias is unregularized and its stochastic steps are tiny, so it is
    // refit exactly: the hinge loss is convex and piecewise linear in `b`.
    bias = best_hinge_bias(&weights, data).unwrap_or(bias);
    let margins = data.x.iter().map(|row| dot(&weights, row) + bias);
    let margin_range = margins.fold(None, |acc: Option<(f64, f64)>, m| {
        Some(acc.map_or((m, m), |(lo, hi)| (lo.min(m), hi.max(m))))
    });
    Ok((
        LinearModel {
            kind: LinearKind::Svm,
            weights,
            bias,
            margin_range,
            training: LinearTraining::Svm(*config),
        },
        trace,
    ))
}

/// Predicted direction and score in `[0, 1]` for a linear model.
pub(crate) fn predict_linear(model: &LinearModel, row: &[f64]) -> (Direction, f64) {
    let margin = model.margin(row);
    match model.kind {
        LinearKind::Logistic => {
            let p = sigmoid(margin);
            (if p > 0.5 { Direction::Up } else { Direction::Down }, p)
        }
        LinearKind::Svm => {
            let score = match model.margin_range {
                Some((lo, hi)) if hi > lo => ((margin - lo) / (hi - lo)).clamp(0.0, 1.0),
                _ => 0.5,
            };
            (if margin > 0.0 { Direction::Up } else { Direction::Down }, score)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> Samples {
        let mut rng = StreamRng::new(11, "test/separable");
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a = rng.normal();
            let b = rng.normal();
            let s = a + 0.5 * b;
            if s.abs() < 0.2 {
                continue;
            }
            x.push(vec![a, b]);
            y.push(if s > 0.0 { Direction::Up } else { Direction::Down });
        }
        Samples::new(x, y)
    }

    fn accuracy(model: &LinearModel, data: &Samples) -> f64 {
        let hits = data
            .x
            .iter()
            .zip(&data.y)
            .filter(|(row, y)| predict_linear(model, row).0 == **y)
            .count();
        hits as f64 / data.len() as f64
    }

    #[test]
    fn logistic_learns_positive_weight_for_correlated_feature() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
        let y = x
            .iter()
            .map(|r| if r[0] > 0.0 { Direction::Up } else { Direction::Down })
            .collect();
        let data = Samples::new(x, y);
        let model = train_logistic(&data, &LogisticConfig::default()).unwrap();
        assert!(model.weights[0] > 0.0);
        assert_eq!(accuracy(&model, &data), 1.0);
    }

    #[test]
    fn svm_separates_separable_data() {
        let data = separable(500);
        let model = train_svm(&data, &SvmConfig::default()).unwrap();
        assert_eq!(accuracy(&model, &data), 1.0);
        let min_margin = data
            .x
            .iter()
            .zip(&data.y)
            .map(|(r, y)| y.sign() * model.margin(r))
            .fold(f64::INFINITY, f64::min);
        assert!(min_margin > 0.0);
    }

    #[test]
    fn heavy_regularization_collapses_to_majority() {
        let mut data = separable(300);
        // Make Up the clear majority.
        let keep: Vec<usize> = (0..data.len())
            .filter(|&i| data.y[i] == Direction::Up || i % 4 == 0)
            .collect();
        data = Samples::new(
            keep.iter().map(|&i| data.x[i].clone()).collect(),
            keep.iter().map(|&i| data.y[i]).collect(),
        );
        let config = SvmConfig {
            lambda: 1e6,
            ..SvmConfig::default()
        };
        let model = train_svm(&data, &config).unwrap();
        assert!(model.weights.iter().all(|w| w.abs() < 1e-3));
        assert!(data.x.iter().all(|r| predict_linear(&model, r).0 == Direction::Up));
    }

    #[test]
    fn zero_logistic_model_predicts_down_at_half() {
        let model = LinearModel {
            kind: LinearKind::Logistic,
            weights: vec![0.0, 0.0],
            bias: 0.0,
            margin_range: None,
            training: LinearTraining::Logistic(LogisticConfig::default()),
        };
        assert_eq!(predict_linear(&model, &[3.0, -1.0]), (Direction::Down, 0.5));
    }

    #[test]
    fn divergence_is_reported() {
        let data = separable(100);
        let config = LogisticConfig {
            learning_rate: f64::MAX,
            ..LogisticConfig::default()
        };
        assert!(matches!(train_logistic(&data, &config), Err(ModelError::NonFiniteLoss { .. })));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let data = Samples::new(vec![vec![1.0], vec![1.0, 2.0]], vec![Direction::Up, Direction::Down]);
        assert!(matches!(
            train_logistic(&data, &LogisticConfig::default()),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let data = separable(200);
        let a = train_svm(&data, &SvmConfig { seed: 5, ..SvmConfig::default() }).unwrap();
        let b = train_svm(&data, &SvmConfig { seed: 5, ..SvmConfig::default() }).unwrap();
        assert_eq!(a, b);
        let init = LogisticConfig {
            init: WeightInit::Normal { scale: 0.1 },
            seed: 9,
            ..LogisticConfig::default()
        };
        assert_eq!(train_logistic(&data, &init).unwrap(), train_logistic(&data, &init).unwrap());
    }
}
