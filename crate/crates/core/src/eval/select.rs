use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dataset::Samples;
use crate::models::ModelSpec;

/// Largest number of candidate subsets `exhaustive:<k>` will evaluate.
pub const MAX_EXHAUSTIVE_SUBSETS: u128 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ForwardStepwise,
    ImportanceTopK(usize),
    ExhaustiveSmallK(usize),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::ForwardStepwise => f.write_str("forward"),
            Strategy::ImportanceTopK(k) => write!(f, "topk:{k}"),
            Strategy::ExhaustiveSmallK(k) => write!(f, "exhaustive:{k}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EvalError::BadStrategy(s.to_owned());
        let k = |v: &str| v.parse::<usize>().ok().filter(|k| *k > 0).ok_or_else(bad);
        match s.split_once(':') {
            None if s == "forward" => Ok(Strategy::ForwardStepwise),
            Some(("topk", v)) => Ok(Strategy::ImportanceTopK(k(v)?)),
            Some(("exhaustive", v)) => Ok(Strategy::ExhaustiveSmallK(k(v)?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    /// Column indices, ascending.
    pub features: Vec<usize>,
    pub correct: u64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub strategy: Strategy,
    pub features: Vec<usize>,
    pub validation_accuracy: f64,
    /// Forward stepwise: every accepted step. Other strategies: the final
    /// subset only.
    pub steps: Vec<SelectionStep>,
}

/// Number of non-empty subsets of size at most `k` from `d` features.
pub fn subset_budget(d: usize, k: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for i in 1..=k.min(d) {
        binom = binom * (d - i + 1) as u128 / i as u128;
        total += binom;
    }
    total
}

struct Evaluator<'a> {
    spec: &'a ModelSpec,
    train: &'a Samples,
    validation: &'a Samples,
}

impl Evaluator<'_> {
    /// Correct validation predictions for a model fit on `columns`.
    fn correct(&self, columns: &[usize]) -> Result<u64, EvalError> {
        let model = self.spec.fit(&self.train.select_columns(columns))?;
        let val = self.validation.select_columns(columns);
        let predicted = model.predict_all(&val)?;
        Ok(predicted.iter().zip(&val.y).filter(|(p, y)| p == y).count() as u64)
    }

    /// Evaluates candidates in parallel and returns the first one (in
    /// candidate order) with the most correct predictions.
    fn best(&self, candidates: &[Vec<usize>]) -> Result<Option<(usize, u64)>, EvalError> {
        let scores: Vec<u64> = candidates
            .par_iter()
            .map(|c| self.correct(c))
            .collect::<Result<_, _>>()?;
        Ok(scores
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, u64)>, (i, &s)| match best {
                Some((_, b)) if b >= s => best,
                _ => Some((i, s)),
            }))
    }

    fn step(&self, features: Vec<usize>, correct: u64) -> SelectionStep {
        SelectionStep {
            features,
            correct,
            validation_accuracy: correct as f64 / self.validation.len() as f64,
        }
    }
}

fn combinations(d: usize, size: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(start: usize, d: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for f in start..d {
            if d - f < size - cur.len() {
                break;
            }
            cur.push(f);
            rec(f + 1, d, size, cur, out);
            cur.pop();
        }
    }
    rec(0, d, size, &mut Vec::with_capacity(size), out);
}

/// Picks a feature subset by validation accuracy. The test slice is never
/// touched here.
///
/// Ties are broken deterministically: forward stepwise prefers the lowest
/// column index, exhaustive search prefers smaller subsets and then the
/// lexicographically first one, top-k prefers lower indices among equal
/// importances.
pub fn select_subset(
    spec: &ModelSpec,
    train: &Samples,
    validation: &Samples,
    strategy: Strategy,
) -> Result<Selection, EvalError> {
    if train.is_empty() || validation.is_empty() {
        return Err(EvalError::EmptySlice);
    }
    let d = train.n_features();
    let eval = Evaluator {
        spec,
        train,
        validation,
    };
    let (features, steps) = match strategy {
        Strategy::ForwardStepwise => {
            let mut selected: Vec<usize> = Vec::new();
            let mut steps: Vec<SelectionStep> = Vec::new();
            loop {
                let candidates: Vec<Vec<usize>> = (0..d)
                    .filter(|f| !selected.contains(f))
                    .map(|f| {
                        let mut c = selected.clone();
                        c.push(f);
                        c.sort_unstable();
                        c
                    })
                    .collect();
                let Some((i, correct)) = eval.best(&candidates)? else {
                    break;
                };
                if steps.last().is_some_and(|s| correct <= s.correct) {
                    break;
                }
                selected.clone_from(&candidates[i]);
                steps.push(eval.step(selected.clone(), correct));
            }
            (selected, steps)
        }
        Strategy::ImportanceTopK(k) => {
            let all: Vec<usize> = (0..d).collect();
            let importances = spec.fit(&train.select_columns(&all))?.feature_importance();
            let mut ranked = all;
            ranked.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
            ranked.truncate(k.min(d));
            ranked.sort_unstable();
            let correct = eval.correct(&ranked)?;
            let steps = vec![eval.step(ranked.clone(), correct)];
            (ranked, steps)
        }
        Strategy::ExhaustiveSmallK(k) => {
            let candidates_count = subset_budget(d, k);
            if candidates_count > MAX_EXHAUSTIVE_SUBSETS {
                return Err(EvalError::BudgetExceeded {
                    candidates: candidates_count,
                    budget: MAX_EXHAUSTIVE_SUBSETS,
                });
            }
            let mut candidates = Vec::new();
            for size in 1..=k.min(d) {
                combinations(d, size, &mut candidates);
            }
            let (i, correct) = eval.best(&candidates)?.ok_or(EvalError::EmptySlice)?;
            let best = candidates.swap_remove(i);
            let steps = vec![eval.step(best.clone(), correct)];
            (best, steps)
        }
    };
    let validation_accuracy = steps.last().map_or(0.0, |s| s.validation_accuracy);
    Ok(Selection {
        strategy,
        features,
        validation_accuracy,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Direction;
    use crate::models::{ForestConfig, ModelKind};
    use crate::rng::StreamRng;

    fn planted(n: usize, d: usize, signal: usize, seed: u64) -> Samples {
        let mut rng = StreamRng::new(seed, "test/select");
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let y = x
            .iter()
            .map(|r| if r[signal] > 0.0 { Direction::Up } else { Direction::Down })
            .collect();
        Samples::new(x, y)
    }

    fn small_forest() -> ModelSpec {
        ModelSpec::Forest(ForestConfig { n_trees: 15, ..ForestConfig::default() })
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("forward".parse::<Strategy>().unwrap(), Strategy::ForwardStepwise);
        assert_eq!("topk:3".parse::<Strategy>().unwrap(), Strategy::ImportanceTopK(3));
        assert_eq!("exhaustive:2".parse::<Strategy>().unwrap(), Strategy::ExhaustiveSmallK(2));
        for bad in ["topk", "topk:0", "exhaustive:x", "backward"] {
            assert!(bad.parse::<Strategy>().is_err(), "{bad}");
        }
        assert_eq!(Strategy::ImportanceTopK(4).to_string(), "topk:4");
    }

    #[test]
    fn budget_counts_subsets() {
        assert_eq!(subset_budget(4, 4), 15);
        assert_eq!(subset_budget(17, 17), (1 << 17) - 1);
        assert_eq!(subset_budget(17, 2), 17 + 136);
    }

    #[test]
    fn exhaustive_guard_refuses_large_searches() {
        let train = planted(40, 18, 0, 1);
        let err = select_subset(&small_forest(), &train, &train, Strategy::ExhaustiveSmallK(18)).unwrap_err();
        assert!(matches!(err, EvalError::BudgetExceeded { candidates: 262_143, .. }));
    }

    #[test]
    fn dominant_feature_is_always_selected() {
        let train = planted(400, 4, 2, 2);
        let val = planted(150, 4, 2, 3);
        for kind in ModelKind::ALL {
            let spec = match kind {
                ModelKind::Forest => small_forest(),
                k => ModelSpec::default_for(k),
            };
            for strategy in [Strategy::ForwardStepwise, Strategy::ImportanceTopK(1), Strategy::ExhaustiveSmallK(2)] {
                let sel = select_subset(&spec, &train, &val, strategy).unwrap();
                assert!(sel.features.contains(&2), "{kind} {strategy}: {:?}", sel.features);
                assert!(sel.validation_accuracy >= 0.97, "{kind} {strategy}: {}", sel.validation_accuracy);
            }
        }
    }

    #[test]
    fn forward_steps_never_lose_accuracy() {
        let mut rng = StreamRng::new(4, "test/forward");
        let x: Vec<Vec<f64>> = (0..300).map(|_| (0..5).map(|_| rng.normal()).collect()).collect();
        let y: Vec<Direction> = x
            .iter()
            .map(|r| if r[0] + 0.7 * r[3] + 0.3 * rng.normal() > 0.0 { Direction::Up } else { Direction::Down })
            .collect();
        let train = Samples::new(x[..200].to_vec(), y[..200].to_vec());
        let val = Samples::new(x[200..].to_vec(), y[200..].to_vec());
        let sel = select_subset(&ModelSpec::default_for(ModelKind::Logistic), &train, &val, Strategy::ForwardStepwise).unwrap();
        assert!(sel.steps.windows(2).all(|w| w[1].validation_accuracy > w[0].validation_accuracy));
        assert_eq!(sel.steps.last().unwrap().features, sel.features);
        assert!(sel.features.contains(&0) && sel.features.contains(&3));
    }

    #[test]
    fn topk_with_all_features_matches_full_model() {
        let train = planted(200, 4, 1, 5);
        let val = planted(100, 4, 1, 6);
        let spec = small_forest();
        let sel = select_subset(&spec, &train, &val, Strategy::ImportanceTopK(4)).unwrap();
        assert_eq!(sel.features, vec![0, 1, 2, 3]);
        let full = spec.fit(&train).unwrap();
        let preds = full.predict_all(&val).unwrap();
        let correct = preds.iter().zip(&val.y).filter(|(p, y)| p == y).count() as u64;
        assert_eq!(sel.steps[0].correct, correct);
    }

    #[test]
    fn exhaustive_matches_bitmask_enumeration() {
        let mut rng = StreamRng::new(7, "test/exhaustive");
        let x: Vec<Vec<f64>> = (0..240).map(|_| (0..4).map(|_| rng.normal()).collect()).collect();
        let y: Vec<Direction> = x
            .iter()
            .map(|r| if r[1] - 0.8 * r[2] + 0.6 * rng.normal() > 0.0 { Direction::Up } else { Direction::Down })
            .collect();
        let train = Samples::new(x[..160].to_vec(), y[..160].to_vec());
        let val = Samples::new(x[160..].to_vec(), y[160..].to_vec());
        let spec = ModelSpec::default_for(ModelKind::Logistic);

        // Oracle: all 15 masks, scored independently, ranked by
        // (accuracy desc, size asc, lexicographic).
        let mut scored: Vec<(u64, Vec<usize>)> = (1u32..16)
            .map(|mask| {
                let cols: Vec<usize> = (0..4).filter(|b| mask >> b & 1 == 1).collect();
                let model = spec.fit(&train.select_columns(&cols)).unwrap();
                let v = val.select_columns(&cols);
                let hits = model.predict_all(&v).unwrap().iter().zip(&v.y).filter(|(p, y)| p == y).count();
                (hits as u64, cols)
            })
            .collect();
        assert_eq!(scored.len(), 15);
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.len().cmp(&b.1.len())).then(a.1.cmp(&b.1)));

        let sel = select_subset(&spec, &train, &val, Strategy::ExhaustiveSmallK(4)).unwrap();
        assert_eq!(sel.features, scored[0].1);
        assert_eq!(sel.steps[0].correct, scored[0].0);
    }
}
