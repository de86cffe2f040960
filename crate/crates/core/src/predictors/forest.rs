//! Random regression forest with variance-reduction splits.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fold_assignment, fold_indices, poisson_nll, GoalModel, TrainingSet};
use crate::data::{FeatureVec, N_FEATURES};
use crate::error::{Error, Result};
use crate::match_prob::MIN_INTENSITY;
use crate::simulator::replication_rng;

pub const DEFAULT_TREES: usize = 5000;
pub const DEFAULT_MIN_LEAF: usize = 7;
pub const DEFAULT_SAMPLE_FRACTION: f64 = 0.632;

/// How each tree's training sample is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// `fraction * n` rows without replacement.
    Subsample { fraction: f64 },
    /// `n` rows with replacement.
    Bootstrap,
    /// Every row once.
    Full,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Subsample {
            fraction: DEFAULT_SAMPLE_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub mtry: usize,
    pub min_leaf: usize,
    pub sampling: Sampling,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: DEFAULT_TREES,
            mtry: 1,
            min_leaf: DEFAULT_MIN_LEAF,
            sampling: Sampling::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Nodes in creation order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &FeatureVec) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub params: ForestParams,
}

impl ForestModel {
    /// Unclamped mean of the tree predictions.
    pub fn raw_predict(&self, x: &FeatureVec) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

impl GoalModel for ForestModel {
    fn predict(&self, diff: &FeatureVec) -> f64 {
        self.raw_predict(diff).max(MIN_INTENSITY)
    }
}

fn draw_sample<R: Rng>(n: usize, sampling: Sampling, rng: &mut R) -> Vec<usize> {
    match sampling {
        Sampling::Full => (0..n).collect(),
        Sampling::Bootstrap => (0..n).map(|_| rng.random_range(0..n)).collect(),
        Sampling::Subsample { fraction } => {
            let m = ((fraction * n as f64).round() as usize).clamp(1, n);
            let mut idx = sample(rng, n, m).into_vec();
            idx.sort_unstable();
            idx
        }
    }
}

struct Grower<'a, R> {
    x: &'a [FeatureVec],
    y: &'a [f64],
    mtry: usize,
    min_leaf: usize,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> Grower<'_, R> {
    fn grow(&mut self, idx: &mut [usize]) -> usize {
        let id = self.nodes.len();
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        self.nodes.push(Node::Leaf { value: sum / n as f64 });
        if n < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(idx, sum) else {
            return id;
        };
        let mid = partition(idx, |&i| self.x[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Maximizes `S_L^2/n_L + S_R^2/n_R` over mtry random features, i.e. the
    /// largest drop in squared error.
    fn best_split(&mut self, idx: &[usize], total: f64) -> Option<(usize, f64)> {
        let n = idx.len();
        let base = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let features = sample(&mut self.rng, N_FEATURES, self.mtry).into_vec();
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
        for f in features {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += order[k].1;
                let n_left = k + 1;
                if order[k].0 == order[k + 1].0 || n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64;
                if score > base + 1e-12 * base.abs().max(1.0) && best.is_none_or(|b| score > b.0) {
                    best = Some((score, f, 0.5 * (order[k].0 + order[k + 1].0)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Stable in-place partition; returns the size of the `true` part.
fn partition(idx: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|i| pred(i));
    let mid = yes.len();
    for (slot, v) in idx.iter_mut().zip(yes.into_iter().chain(no)) {
        *slot = v;
    }
    mid
}

pub fn fit_tree<R: Rng>(set: &TrainingSet, sample_idx: &[usize], mtry: usize, min_leaf: usize, rng: R) -> Tree {
    let mut g = Grower {
        x: &set.x,
        y: &set.y,
        mtry,
        min_leaf: min_leaf.max(1),
        rng,
        nodes: Vec::new(),
    };
    let mut idx = sample_idx.to_vec();
    g.grow(&mut idx);
    Tree { nodes: g.nodes }
}

/// Tree `t` draws from stream `t` of the seed, so the forest does not depend
/// on scheduling.
pub fn fit_forest(set: &TrainingSet, params: &ForestParams) -> Result<ForestModel> {
    set.check(1)?;
    if params.trees == 0 {
        return Err(Error::InvalidInput("forest needs at least one tree".into()));
    }
    if !(1..=N_FEATURES).contains(&params.mtry) {
        return Err(Error::InvalidInput(format!("mtry must lie in 1..=8, got {}", params.mtry)));
    }
    if let Sampling::Subsample { fraction } = params.sampling {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidInput(format!("sample fraction must lie in (0, 1], got {fraction}")));
        }
    }
    let trees = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = replication_rng(params.seed, t as u64);
            let idx = draw_sample(set.len(), params.sampling, &mut rng);
            fit_tree(set, &idx, params.mtry, params.min_leaf, rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        params: *params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestTuning {
    /// `(mtry, mean out-of-fold negative log-likelihood per row)`.
    pub entries: Vec<(usize, f64)>,
    pub best: usize,
}

pub const MTRY_GRID: [usize; 4] = [1, 2, 3, 4];

/// Cross-validated mtry over [`MTRY_GRID`]; ties go to the smaller value.
pub fn tune_forest(set: &TrainingSet, params: &ForestParams, folds: usize) -> Result<ForestTuning> {
    set.check(folds.max(2))?;
    let assignment = fold_assignment(&set.group, folds, params.seed);
    let parts = fold_indices(&assignment, folds);
    let mut entries = Vec::with_capacity(MTRY_GRID.len());
    for mtry in MTRY_GRID {
        let mut total = 0.0;
        for (f, (train, test)) in parts.iter().enumerate() {
            if test.is_empty() {
                continue;
            }
            let p = ForestParams {
                mtry,
                seed: params.seed.wrapping_add(f as u64 + 1),
                ..*params
            };
            let model = fit_forest(&set.subset(train), &p)?;
            let te = set.subset(test);
            total += poisson_nll(&te.y, &model.predict_all(&te.x));
        }
        entries.push((mtry, total / set.len() as f64));
    }
    let best = entries
        .iter()
        .fold(entries[0], |b, e| if e.1 < b.1 { *e } else { b })
        .0;
    Ok(ForestTuning { entries, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize) -> TrainingSet {
        let x: Vec<FeatureVec> = (0..n)
            .map(|i| std::array::from_fn(|k| ((i * (k + 3) * 7919) % 97) as f64 / 97.0 - 0.5))
            .collect();
        let y = x.iter().map(|r| if r[0] > 0.0 { 3.0 } else { 1.0 }).collect();
        TrainingSet::new(x, y)
    }

    #[test]
    fn stump_predicts_global_mean() {
        let s = set(40);
        let p = ForestParams {
            trees: 1,
            mtry: 8,
            min_leaf: 40,
            sampling: Sampling::Full,
            seed: 1,
        };
        let m = fit_forest(&s, &p).unwrap();
        assert_eq!(m.trees[0].nodes.len(), 1);
        let mean = s.mean_response();
        for x in &s.x {
            assert!((m.predict(x) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_response() {
        let mut s = set(60);
        s.y = vec![2.0; 60];
        let m = fit_forest(&s, &ForestParams { trees: 20, ..Default::default() }).unwrap();
        for x in &s.x {
            assert_eq!(m.predict(x), 2.0);
        }
    }

    #[test]
    fn prediction_is_tree_mean_and_order_free() {
        let s = set(80);
        let mut m = fit_forest(&s, &ForestParams { trees: 25, mtry: 3, ..Default::default() }).unwrap();
        let x = s.x[5];
        let manual: f64 = m.trees.iter().map(|t| t.predict(&x)).sum::<f64>() / 25.0;
        assert!((m.predict(&x) - manual).abs() < 1e-12);
        let before = m.predict(&x);
        m.trees.reverse();
        assert!((m.predict(&x) - before).abs() < 1e-12);
    }

    #[test]
    fn finds_the_step() {
        let s = set(200);
        let m = fit_forest(
            &s,
            &ForestParams {
                trees: 50,
                mtry: 8,
                sampling: Sampling::Bootstrap,
                ..Default::default()
            },
        )
        .unwrap();
        let mut hi = [0.0; 8];
        hi[0] = 0.4;
        let mut lo = [0.0; 8];
        lo[0] = -0.4;
        assert!((m.predict(&hi) - 3.0).abs() < 0.1);
        assert!((m.predict(&lo) - 1.0).abs() < 0.1);
    }

    #[test]
    fn leaves_respect_min_size() {
        let s = set(100);
        let idx: Vec<usize> = (0..100).collect();
        let tree = fit_tree(&s, &idx, 8, 7, replication_rng(1, 0));
        fn sizes(t: &Tree, s: &TrainingSet) -> Vec<usize> {
            let mut counts = vec![0; t.nodes.len()];
            for x in &s.x {
                let mut i = 0;
                while let Node::Split { feature, threshold, left, right } = &t.nodes[i] {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                counts[i] += 1;
            }
            counts
                .into_iter()
                .enumerate()
                .filter(|(i, _)| matches!(t.nodes[*i], Node::Leaf { .. }))
                .map(|(_, c)| c)
                .collect()
        }
        assert!(sizes(&tree, &s).iter().all(|&c| c >= 7));
    }

    #[test]
    fn invalid_params() {
        let s = set(20);
        assert!(fit_forest(&s, &ForestParams { trees: 0, ..Default::default() }).is_err());
        assert!(fit_forest(&s, &ForestParams { mtry: 9, ..Default::default() }).is_err());
        assert!(fit_forest(&s, &ForestParams { mtry: 0, ..Default::default() }).is_err());
    }
}
