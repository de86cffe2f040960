//! Goal-count regressors on the 8-vector of covariate differences.

pub mod boosting;
pub mod forest;
pub mod lasso;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FeatureDiffRow, FeatureVec};
use crate::error::{Error, Result};
use crate::match_prob::MIN_INTENSITY;

pub use boosting::{fit_boosted, tune_boosted, BoostGrid, BoostParams, BoostedModel};
pub use forest::{fit_forest, tune_forest, ForestModel, ForestParams, Sampling};
pub use lasso::{fit_lasso, tune_lasso, LassoModel};

/// A fitted model mapping covariate differences to an expected goal count.
pub trait GoalModel: Send + Sync {
    fn predict(&self, diff: &FeatureVec) -> f64;

    fn predict_all(&self, x: &[FeatureVec]) -> Vec<f64> {
        x.iter().map(|d| self.predict(d)).collect()
    }
}

/// Design and response of a goal-model fit. `group` ties the two rows of a
/// match together so cross-validation never splits them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub x: Vec<FeatureVec>,
    pub y: Vec<f64>,
    pub group: Vec<usize>,
}

impl TrainingSet {
    pub fn new(x: Vec<FeatureVec>, y: Vec<f64>) -> Self {
        let group = (0..x.len()).collect();
        TrainingSet { x, y, group }
    }

    pub fn from_rows(rows: &[FeatureDiffRow]) -> Self {
        let mut ids: BTreeMap<(i32, usize), usize> = BTreeMap::new();
        let mut set = TrainingSet::default();
        for r in rows {
            let next = ids.len();
            let g = *ids.entry((r.year, r.match_index)).or_insert(next);
            set.x.push(r.diff);
            set.y.push(r.goals as f64);
            set.group.push(g);
        }
        set
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        TrainingSet {
            x: idx.iter().map(|&i| self.x[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            group: idx.iter().map(|&i| self.group[i]).collect(),
        }
    }

    pub fn mean_response(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.len() as f64
    }

    pub(crate) fn check(&self, min_rows: usize) -> Result<()> {
        if self.x.len() != self.y.len() || self.group.len() != self.y.len() {
            return Err(Error::InvalidInput("design and response lengths differ".into()));
        }
        if self.len() < min_rows {
            return Err(Error::InvalidInput(format!(
                "need at least {min_rows} rows, got {}",
                self.len()
            )));
        }
        if self.y.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("responses must be non-negative".into()));
        }
        if self.x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite covariate".into()));
        }
        Ok(())
    }
}

/// Fold label per row. Whole groups are shuffled with the seed and dealt
/// round-robin into `k` folds.
pub fn fold_assignment(group: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut ids: Vec<usize> = group.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let fold_of: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(pos, g)| (*g, pos % k)).collect();
    group.iter().map(|g| fold_of[g]).collect()
}

/// (train, test) row indices of each fold.
pub fn fold_indices(folds: &[usize], k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..folds.len()).partition(|&i| folds[i] == f);
            (train, test)
        })
        .collect()
}

/// Largest fold count not above `requested` for which every training part
/// has a non-constant response and every fold is non-empty.
pub(crate) fn usable_folds(set: &TrainingSet, requested: usize, seed: u64) -> Option<(usize, Vec<usize>)> {
    let groups = {
        let mut g = set.group.clone();
        g.sort_unstable();
        g.dedup();
        g.len()
    };
    for k in (2..=requested.min(groups)).rev() {
        let folds = fold_assignment(&set.group, k, seed);
        let ok = fold_indices(&folds, k).iter().all(|(train, test)| {
            !test.is_empty() && train.iter().any(|&i| set.y[i] != set.y[train[0]])
        });
        if ok {
            return Some((k, folds));
        }
    }
    None
}

/// Poisson deviance `2 sum [y log(y/mu) - (y - mu)]`.
pub fn poisson_deviance(y: &[f64], mu: &[f64]) -> f64 {
    2.0 * y
        .iter()
        .zip(mu)
        .map(|(&y, &m)| {
            let m = m.max(MIN_INTENSITY);
            let t = if y > 0.0 { y * (y / m).ln() } else { 0.0 };
            t - (y - m)
        })
        .sum::<f64>()
}

/// Poisson negative log-likelihood, `sum [mu - y log mu + log y!]`.
pub fn poisson_nll(y: &[f64], mu: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&y, &m)| {
            let m = m.max(MIN_INTENSITY);
            let log_fact: f64 = (2..=y as u64).map(|k| (k as f64).ln()).sum();
            m - y * m.ln() + log_fact
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_keep_groups_together() {
        let group: Vec<usize> = (0..40).map(|i| i / 2).collect();
        let folds = fold_assignment(&group, 10, 3);
        for i in (0..40).step_by(2) {
            assert_eq!(folds[i], folds[i + 1]);
        }
        for f in 0..10 {
            assert_eq!(folds.iter().filter(|&&x| x == f).count(), 4);
        }
        assert_eq!(folds, fold_assignment(&group, 10, 3));
    }

    #[test]
    fn degenerate_folds_fall_back() {
        // Two non-zero responses: a fold holding both leaves a constant
        // training part, so some seeds need fewer folds.
        let mut y = vec![0.0; 10];
        y[0] = 2.0;
        y[1] = 1.0;
        let set = TrainingSet::new(vec![[0.0; 8]; 10], y);
        let mut reduced = false;
        for seed in 0..50 {
            let (k, folds) = usable_folds(&set, 5, seed).unwrap();
            reduced |= k < 5;
            for (train, _) in fold_indices(&folds, k) {
                assert!(train.iter().any(|&i| set.y[i] != set.y[train[0]]));
            }
        }
        assert!(reduced);
        let flat = TrainingSet::new(vec![[0.0; 8]; 10], vec![1.0; 10]);
        assert!(usable_folds(&flat, 10, 1).is_none());
    }

    #[test]
    fn deviance_zero_at_saturation() {
        let y = [0.0, 1.0, 4.0];
        assert!(poisson_deviance(&y, &[1e-300, 1.0, 4.0]).abs() < 1e-5);
        let nll = poisson_nll(&[2.0], &[1.5]);
        assert!((nll - (1.5 - 2.0 * 1.5f64.ln() + 2f64.ln())).abs() < 1e-12);
    }
}
