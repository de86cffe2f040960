//! Second-order gradient boosting of regression trees for Poisson counts.
//!
//! Trees are fitted in log-intensity space. With margin `F`, the Poisson
//! deviance has gradient `exp(F) - y` and hessian `exp(F)`; a leaf's weight
//! is `-G / (H + l2)` limited to `max_delta_step` in absolute value, and a
//! split is kept when its gain exceeds the leaf-count penalty.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fold_indices, poisson_deviance, usable_folds, GoalModel, TrainingSet};
use crate::data::{FeatureVec, N_FEATURES};
use crate::error::{Error, Result};
use crate::match_prob::MIN_INTENSITY;

/// Training intensities above this signal a runaway fit.
pub const MAX_TRAINING_INTENSITY: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rounds: usize,
    pub learning_rate: f64,
    /// Penalty per leaf (gamma).
    pub leaf_count_penalty: f64,
    /// L2 penalty on leaf weights (lambda).
    pub l2_leaf_penalty: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    /// Bound on each leaf weight before shrinkage; 0 disables it.
    pub max_delta_step: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            rounds: 100,
            learning_rate: 0.1,
            leaf_count_penalty: 0.0,
            l2_leaf_penalty: 1.0,
            max_depth: 3,
            min_child_weight: 1.0,
            max_delta_step: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoostNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTree {
    pub nodes: Vec<BoostNode>,
}

impl BoostTree {
    pub fn predict(&self, x: &FeatureVec) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                BoostNode::Leaf { weight } => return *weight,
                BoostNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaf_weights(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                BoostNode::Leaf { weight } => Some(*weight),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    /// Initial margin, `log(mean y)`.
    pub base_margin: f64,
    pub trees: Vec<BoostTree>,
    pub params: BoostParams,
    /// Training deviance after initialization and after each round.
    pub deviance_trace: Vec<f64>,
}

impl BoostedModel {
    pub fn margin(&self, x: &FeatureVec) -> f64 {
        self.margin_at(x, self.trees.len())
    }

    /// Margin using only the first `rounds` trees.
    pub fn margin_at(&self, x: &FeatureVec, rounds: usize) -> f64 {
        self.base_margin
            + self.params.learning_rate * self.trees[..rounds].iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn truncated(&self, rounds: usize) -> BoostedModel {
        BoostedModel {
            base_margin: self.base_margin,
            trees: self.trees[..rounds].to_vec(),
            params: BoostParams { rounds, ..self.params },
            deviance_trace: self.deviance_trace[..=rounds].to_vec(),
        }
    }
}

impl GoalModel for BoostedModel {
    fn predict(&self, diff: &FeatureVec) -> f64 {
        self.margin(diff).exp().max(MIN_INTENSITY)
    }
}

struct TreeBuilder<'a> {
    x: &'a [FeatureVec],
    g: &'a [f64],
    h: &'a [f64],
    p: &'a BoostParams,
    nodes: Vec<BoostNode>,
}

impl TreeBuilder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.p.l2_leaf_penalty)
    }

    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        let w = -g / (h + self.p.l2_leaf_penalty);
        if self.p.max_delta_step > 0.0 {
            w.clamp(-self.p.max_delta_step, self.p.max_delta_step)
        } else {
            w
        }
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let gs: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let hs: f64 = idx.iter().map(|&i| self.h[i]).sum();
        self.nodes.push(BoostNode::Leaf {
            weight: self.leaf_weight(gs, hs),
        });
        if depth >= self.p.max_depth || idx.len() < 2 {
            return id;
        }
        let parent = self.score(gs, hs);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for f in 0..N_FEATURES {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                gl += self.g[order[k]];
                hl += self.h[order[k]];
                let (xa, xb) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if xa == xb {
                    continue;
                }
                let (gr, hr) = (gs - gl, hs - hl);
                if hl < self.p.min_child_weight || hr < self.p.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - self.p.leaf_count_penalty;
                if gain > 0.0 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, 0.5 * (xa + xb)));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return id;
        };
        let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let mid = yes.len();
        for (slot, v) in idx.iter_mut().zip(yes.into_iter().chain(no)) {
            *slot = v;
        }
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = BoostNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// One tree on given gradients and hessians.
pub fn fit_boost_tree(x: &[FeatureVec], g: &[f64], h: &[f64], params: &BoostParams) -> BoostTree {
    let mut b = TreeBuilder {
        x,
        g,
        h,
        p: params,
        nodes: Vec::new(),
    };
    let mut idx: Vec<usize> = (0..x.len()).collect();
    b.build(&mut idx, 0);
    BoostTree { nodes: b.nodes }
}

fn check_params(p: &BoostParams) -> Result<()> {
    if !(p.learning_rate >= 0.0 && p.learning_rate.is_finite()) {
        return Err(Error::InvalidInput(format!("learning rate must be non-negative, got {}", p.learning_rate)));
    }
    if p.l2_leaf_penalty < 0.0 || p.leaf_count_penalty < 0.0 || p.max_delta_step < 0.0 || p.min_child_weight < 0.0 {
        return Err(Error::InvalidInput("boosting penalties must be non-negative".into()));
    }
    Ok(())
}

pub fn fit_boosted(set: &TrainingSet, params: &BoostParams) -> Result<BoostedModel> {
    set.check(1)?;
    check_params(params)?;
    let ybar = set.mean_response();
    if ybar <= 0.0 {
        return Err(Error::InvalidInput("all responses are zero".into()));
    }
    let base_margin = ybar.ln();
    let n = set.len();
    let mut margin = vec![base_margin; n];
    let mu = |m: &[f64]| m.iter().map(|v| v.exp()).collect::<Vec<f64>>();
    let mut deviance_trace = vec![poisson_deviance(&set.y, &mu(&margin))];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for round in 0..params.rounds {
        for i in 0..n {
            let m = margin[i].exp();
            g[i] = m - set.y[i];
            h[i] = m;
        }
        let tree = fit_boost_tree(&set.x, &g, &h, params);
        for i in 0..n {
            margin[i] += params.learning_rate * tree.predict(&set.x[i]);
        }
        let lambda = mu(&margin);
        if let Some(big) = lambda.iter().copied().find(|l| !(l.is_finite() && *l <= MAX_TRAINING_INTENSITY)) {
            return Err(Error::Numerical(format!(
                "training intensity {big:.3e} after round {}; lower the learning rate",
                round + 1
            )));
        }
        deviance_trace.push(poisson_deviance(&set.y, &lambda));
        trees.push(tree);
    }
    Ok(BoostedModel {
        base_margin,
        trees,
        params: *params,
        deviance_trace,
    })
}

/// Candidate values for cross-validated tuning. Every combination of depth,
/// leaf penalties and l2 penalties is fitted once per fold with the largest
/// round count; smaller round counts are read off the same fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostGrid {
    pub max_depth: Vec<usize>,
    pub leaf_count_penalty: Vec<f64>,
    pub l2_leaf_penalty: Vec<f64>,
    pub rounds: Vec<usize>,
    pub learning_rate: f64,
}

impl Default for BoostGrid {
    fn default() -> Self {
        BoostGrid {
            max_depth: vec![1, 2, 3],
            leaf_count_penalty: vec![0.0, 1.0],
            l2_leaf_penalty: vec![1.0, 10.0],
            rounds: vec![10, 25, 50, 100, 200],
            learning_rate: 0.1,
        }
    }
}

impl BoostGrid {
    pub fn single(params: BoostParams) -> Self {
        BoostGrid {
            max_depth: vec![params.max_depth],
            leaf_count_penalty: vec![params.leaf_count_penalty],
            l2_leaf_penalty: vec![params.l2_leaf_penalty],
            rounds: vec![params.rounds],
            learning_rate: params.learning_rate,
        }
    }

    fn points(&self) -> Vec<BoostParams> {
        let mut out = Vec::new();
        let max_rounds = self.rounds.iter().copied().max().unwrap_or(0);
        for &max_depth in &self.max_depth {
            for &leaf_count_penalty in &self.leaf_count_penalty {
                for &l2_leaf_penalty in &self.l2_leaf_penalty {
                    out.push(BoostParams {
                        rounds: max_rounds,
                        learning_rate: self.learning_rate,
                        leaf_count_penalty,
                        l2_leaf_penalty,
                        max_depth,
                        ..Default::default()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTuningEntry {
    pub params: BoostParams,
    /// Mean out-of-fold deviance per row.
    pub cv_deviance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTuning {
    pub entries: Vec<BoostTuningEntry>,
    pub best: BoostParams,
    pub folds: usize,
}

/// K-fold cross-validated grid search. Ties go to the earlier entry, and
/// within one tree setting to fewer rounds.
pub fn tune_boosted(set: &TrainingSet, grid: &BoostGrid, folds: usize, seed: u64) -> Result<BoostTuning> {
    if grid.max_depth.is_empty()
        || grid.leaf_count_penalty.is_empty()
        || grid.l2_leaf_penalty.is_empty()
        || grid.rounds.is_empty()
    {
        return Err(Error::InvalidInput("boosting grid has an empty axis".into()));
    }
    set.check(folds.max(2))?;
    let mut rounds = grid.rounds.clone();
    rounds.sort_unstable();
    rounds.dedup();
    let points = grid.points();
    if points.len() == 1 && rounds.len() == 1 {
        let best = BoostParams {
            rounds: rounds[0],
            ..points[0]
        };
        return Ok(BoostTuning {
            entries: vec![BoostTuningEntry {
                params: best,
                cv_deviance: f64::NAN,
            }],
            best,
            folds: 0,
        });
    }
    let Some((k, assignment)) = usable_folds(set, folds, seed) else {
        return Err(Error::InvalidInput("response is constant; nothing to tune".into()));
    };
    let parts = fold_indices(&assignment, k);
    let n = set.len() as f64;
    let per_point: Vec<Vec<BoostTuningEntry>> = points
        .par_iter()
        .map(|p| {
            let mut dev = vec![0.0; rounds.len()];
            for (train, test) in &parts {
                let model = fit_boosted(&set.subset(train), p)?;
                let te = set.subset(test);
                for (r, &nr) in rounds.iter().enumerate() {
                    let mu: Vec<f64> = te.x.iter().map(|x| model.margin_at(x, nr).exp()).collect();
                    dev[r] += poisson_deviance(&te.y, &mu);
                }
            }
            Ok(rounds
                .iter()
                .zip(dev)
                .map(|(&nr, d)| BoostTuningEntry {
                    params: BoostParams { rounds: nr, ..*p },
                    cv_deviance: d / n,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let entries: Vec<BoostTuningEntry> = per_point.into_iter().flatten().collect();
    let best = entries
        .iter()
        .fold(&entries[0], |b, e| if e.cv_deviance < b.cv_deviance { e } else { b })
        .params;
    Ok(BoostTuning { entries, best, folds: k })
}
