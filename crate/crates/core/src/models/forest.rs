//! Random forest of CART trees with Gini splits.
//!
//! Training rows are put in a canonical order (lexicographic on the feature
//! values, then label) before bootstrapping, so the fitted forest does not
//! depend on the order rows arrive in. Tree `k` draws from its own stream
//! keyed by `(seed, "forest/tree/k")`, which makes the result independent of
//! how trees are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::dataset::{Direction, Samples};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: Some(12),
            min_samples_leaf: 5,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub up: u64,
    pub down: u64,
}

impl ClassCounts {
    fn add(&mut self, label: Direction, weight: u64) {
        match label {
            Direction::Up => self.up += weight,
            Direction::Down => self.down += weight,
        }
    }

    fn sub(&mut self, label: Direction, weight: u64) {
        match label {
            Direction::Up => self.up -= weight,
            Direction::Down => self.down -= weight,
        }
    }

    pub fn total(&self) -> u64 {
        self.up + self.down
    }

    pub fn gini(&self) -> f64 {
        let n = self.total() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let p = self.up as f64 / n;
        2.0 * p * (1.0 - p)
    }

    /// Majority class; ties go to Down.
    pub fn majority(&self) -> Direction {
        if self.up > self.down {
            Direction::Up
        } else {
            Direction::Down
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: ClassCounts,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: ClassCounts,
    },
}

impl Node {
    pub fn counts(&self) -> ClassCounts {
        match self {
            Node::Leaf { counts } | Node::Split { counts, .. } => *counts,
        }
    }
}

/// Flat tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> Direction {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts.majority(),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Weighted Gini decrease per feature, normalized to sum 1 when any
    /// split decreased impurity.
    pub fn importances(&self, n_features: usize) -> Vec<f64> {
        let mut imp = vec![0.0; n_features];
        for node in &self.nodes {
            if let Node::Split {
                feature,
                left,
                right,
                counts,
                ..
            } = node
            {
                let (l, r) = (self.nodes[*left].counts(), self.nodes[*right].counts());
                imp[*feature] += counts.total() as f64 * counts.gini()
                    - l.total() as f64 * l.gini()
                    - r.total() as f64 * r.gini();
            }
        }
        normalize(&mut imp);
        imp
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        for x in v.iter_mut() {
            *x /= total;
        }
        true
    } else {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub config: ForestConfig,
}

impl ForestModel {
    pub fn from_trees(trees: Vec<Tree>, n_features: usize) -> Self {
        Self {
            config: ForestConfig {
                n_trees: trees.len(),
                ..ForestConfig::default()
            },
            trees,
            n_features,
        }
    }

    pub fn up_votes(&self, row: &[f64]) -> usize {
        self.trees
            .iter()
            .filter(|t| t.predict(row) == Direction::Up)
            .count()
    }

    /// Majority vote; a tied vote predicts Down. The score is the Up vote
    /// fraction.
    pub fn predict(&self, row: &[f64]) -> (Direction, f64) {
        let up = self.up_votes(row);
        let n = self.trees.len();
        let label = if 2 * up > n { Direction::Up } else { Direction::Down };
        (label, if n == 0 { 0.0 } else { up as f64 / n as f64 })
    }

    /// Mean of per-tree normalized importances, renormalized. `None` if no
    /// tree has a split.
    pub fn importances(&self) -> Option<Vec<f64>> {
        let mut imp = vec![0.0; self.n_features];
        for tree in &self.trees {
            for (a, b) in imp.iter_mut().zip(tree.importances(self.n_features)) {
                *a += b;
            }
        }
        normalize(&mut imp).then_some(imp)
    }
}

struct Grower<'a> {
    data: &'a Samples,
    config: &'a ForestConfig,
    max_features: usize,
    rng: StreamRng,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    decrease: f64,
    split_at: usize,
}

impl Grower<'_> {
    /// `members` holds `(row, weight)` pairs; weights are bootstrap
    /// multiplicities.
    fn grow(&mut self, members: Vec<(usize, u64)>, depth: usize) -> usize {
        let mut counts = ClassCounts::default();
        for &(i, w) in &members {
            counts.add(self.data.y[i], w);
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let n = counts.total() as usize;
        let too_deep = self.config.max_depth.is_some_and(|d| depth >= d);
        let min_leaf = self.config.min_samples_leaf.max(1);
        if counts.up == 0 || counts.down == 0 || too_deep || n < 2 * min_leaf {
            return id;
        }
        let Some((best, sorted)) = self.best_split(members, counts, min_leaf) else {
            return id;
        };
        let (left_members, right_members) = {
            let mut sorted = sorted;
            let right = sorted.split_off(best.split_at);
            (sorted, right)
        };
        let left = self.grow(left_members, depth + 1);
        let right = self.grow(right_members, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            counts,
        };
        id
    }

    fn best_split(
        &mut self,
        members: Vec<(usize, u64)>,
        parent: ClassCounts,
        min_leaf: usize,
    ) -> Option<(Candidate, Vec<(usize, u64)>)> {
        let d = self.data.n_features();
        let mut features: Vec<usize> = (0..d).collect();
        self.rng.shuffle(&mut features);
        let parent_impurity = parent.total() as f64 * parent.gini();
        let mut best: Option<(Candidate, Vec<(usize, u64)>)> = None;
        let mut work = members;
        for (tried, &f) in features.iter().enumerate() {
            // Past the sampled features, keep looking only until some
            // split is found.
            if tried >= self.max_features && best.is_some() {
                break;
            }
            let x = &self.data.x;
            work.sort_by(|a, b| x[a.0][f].total_cmp(&x[b.0][f]).then(a.0.cmp(&b.0)));
            let mut left = ClassCounts::default();
            let mut right = parent;
            let mut local: Option<Candidate> = None;
            for k in 0..work.len() - 1 {
                let (i, w) = work[k];
                left.add(self.data.y[i], w);
                right.sub(self.data.y[i], w);
                let (a, b) = (x[i][f], x[work[k + 1].0][f]);
                if a == b || (left.total() as usize) < min_leaf || (right.total() as usize) < min_leaf {
                    continue;
                }
                let decrease = parent_impurity
                    - left.total() as f64 * left.gini()
                    - right.total() as f64 * right.gini();
                if local.as_ref().map_or(true, |c| decrease > c.decrease) {
                    let mid = a + (b - a) / 2.0;
                    local = Some(Candidate {
                        feature: f,
                        threshold: if mid < b { mid } else { a },
                        decrease,
                        split_at: k + 1,
                    });
                }
            }
            if let Some(c) = local {
                if best.as_ref().map_or(true, |(b, _)| c.decrease > b.decrease) {
                    best = Some((c, work.clone()));
                }
            }
        }
        best
    }
}

/// Fits a random forest. Trees are grown in parallel on the current rayon
/// pool.
pub fn train_forest(data: &Samples, config: &ForestConfig) -> Result<ForestModel, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let d = data.n_features();
    if let Some(r) = data.x.iter().find(|r| r.len() != d) {
        return Err(ModelError::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| {
        data.x[a]
            .iter()
            .zip(&data.x[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((data.y[a] == Direction::Up).cmp(&(data.y[b] == Direction::Up)))
    });
    // Reindex so that row ids are canonical ranks; split sorting breaks
    // ties on these ids.
    let canonical_data = Samples::new(
        order.iter().map(|&i| data.x[i].clone()).collect(),
        order.iter().map(|&i| data.y[i]).collect(),
    );
    let data = &canonical_data;
    let max_features = config
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = StreamRng::new(config.seed, &format!("forest/tree/{k}"));
            let n = data.len();
            let members: Vec<(usize, u64)> = if config.bootstrap {
                let mut weights = vec![0u64; n];
                for _ in 0..n {
                    weights[rng.below(n as u64) as usize] += 1;
                }
                weights
                    .into_iter()
                    .enumerate()
                    .filter(|(_, w)| *w > 0)
                    .collect()
            } else {
                (0..n).map(|i| (i, 1)).collect()
            };
            let mut grower = Grower {
                data,
                config,
                max_features,
                rng,
                nodes: Vec::new(),
            };
            grower.grow(members, 0);
            Tree { nodes: grower.nodes }
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_features: d,
        config: *config,
    })
}
