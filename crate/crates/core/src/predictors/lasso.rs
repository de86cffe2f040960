//! L1-penalized Poisson regression with log link.
//!
//! Maximizes `sum(y * eta - exp(eta)) - penalty * sum |b_k|` where `b` are the
//! slopes on standardized covariates. Outer loop: iteratively reweighted
//! quadratic approximation with step halving; inner loop: cyclic coordinate
//! descent with soft thresholding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fold_indices, poisson_deviance, usable_folds, GoalModel, TrainingSet};
use crate::data::{FeatureVec, N_FEATURES};
use crate::error::{Error, Result};
use crate::match_prob::MIN_INTENSITY;

const MAX_OUTER: usize = 200;
const MAX_INNER: usize = 10_000;
const TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub intercept: f64,
    /// Slopes on the original covariate scale.
    pub coefficients: FeatureVec,
    pub penalty: f64,
    pub means: FeatureVec,
    /// Population standard deviations; 0 marks a constant covariate.
    pub scales: FeatureVec,
    pub iterations: usize,
}

impl LassoModel {
    pub fn linear_predictor(&self, x: &FeatureVec) -> f64 {
        self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Slopes on the standardized scale, as penalized during the fit.
    pub fn standardized_coefficients(&self) -> FeatureVec {
        std::array::from_fn(|k| self.coefficients[k] * self.scales[k])
    }
}

impl GoalModel for LassoModel {
    fn predict(&self, diff: &FeatureVec) -> f64 {
        self.linear_predictor(diff).exp().max(MIN_INTENSITY)
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

struct Standardized {
    z: Vec<FeatureVec>,
    means: FeatureVec,
    scales: FeatureVec,
}

fn standardize(x: &[FeatureVec]) -> Standardized {
    let n = x.len() as f64;
    let mut means = [0.0; N_FEATURES];
    let mut scales = [0.0; N_FEATURES];
    for k in 0..N_FEATURES {
        means[k] = x.iter().map(|r| r[k]).sum::<f64>() / n;
        let var = x.iter().map(|r| (r[k] - means[k]).powi(2)).sum::<f64>() / n;
        scales[k] = var.sqrt();
    }
    let z = x
        .iter()
        .map(|r| {
            std::array::from_fn(|k| {
                if scales[k] > 0.0 {
                    (r[k] - means[k]) / scales[k]
                } else {
                    0.0
                }
            })
        })
        .collect();
    Standardized { z, means, scales }
}

fn penalized_objective(z: &[FeatureVec], y: &[f64], b0: f64, b: &FeatureVec, penalty: f64) -> f64 {
    let ll: f64 = z
        .iter()
        .zip(y)
        .map(|(r, &y)| {
            let eta = b0 + r.iter().zip(b).map(|(a, c)| a * c).sum::<f64>();
            y * eta - eta.exp()
        })
        .sum();
    ll - penalty * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Smallest penalty at which every slope is zero.
pub fn penalty_max(set: &TrainingSet) -> f64 {
    let st = standardize(&set.x);
    let ybar = set.mean_response();
    (0..N_FEATURES)
        .map(|k| st.z.iter().zip(&set.y).map(|(r, y)| r[k] * (y - ybar)).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

pub fn fit_lasso(set: &TrainingSet, penalty: f64) -> Result<LassoModel> {
    set.check(2)?;
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return Err(Error::InvalidInput(format!("penalty must be non-negative, got {penalty}")));
    }
    let ybar = set.mean_response();
    if ybar <= 0.0 {
        return Err(Error::InvalidInput("all responses are zero".into()));
    }
    let st = standardize(&set.x);
    let (z, y) = (&st.z, &set.y);
    let n = y.len();
    let active: Vec<usize> = (0..N_FEATURES).filter(|&k| st.scales[k] > 0.0).collect();

    let mut b0 = ybar.ln();
    let mut b = [0.0; N_FEATURES];
    let mut obj = penalized_objective(z, y, b0, &b, penalty);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;

    let mut eta = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut resid = vec![0.0; n];
    for outer in 0..MAX_OUTER {
        iterations = outer + 1;
        // Quadratic approximation at (b0, b): weights mu, working response
        // eta + (y - mu) / mu. `resid` holds working response minus fit.
        for i in 0..n {
            eta[i] = b0 + z[i].iter().zip(&b).map(|(a, c)| a * c).sum::<f64>();
            let mu = eta[i].exp();
            w[i] = mu;
            resid[i] = (y[i] - mu) / mu;
        }
        let (mut nb0, mut nb) = (b0, b);
        let sw: f64 = w.iter().sum();
        let col_ss: FeatureVec = std::array::from_fn(|k| (0..n).map(|i| w[i] * z[i][k] * z[i][k]).sum());
        for _ in 0..MAX_INNER {
            let mut delta: f64 = 0.0;
            let d0 = (0..n).map(|i| w[i] * resid[i]).sum::<f64>() / sw;
            nb0 += d0;
            for i in 0..n {
                resid[i] -= d0;
            }
            delta = delta.max(d0.abs());
            for &k in &active {
                let rho: f64 = (0..n).map(|i| w[i] * z[i][k] * resid[i]).sum::<f64>() + col_ss[k] * nb[k];
                let new = soft_threshold(rho, penalty) / col_ss[k];
                let d = new - nb[k];
                if d != 0.0 {
                    for i in 0..n {
                        resid[i] -= d * z[i][k];
                    }
                    nb[k] = new;
                }
                delta = delta.max(d.abs());
            }
            if delta < TOL {
                break;
            }
        }
        // Step halving keeps the penalized objective from decreasing.
        let mut t = 1.0;
        let (mut cb0, mut cb) = (nb0, nb);
        let mut cobj = penalized_objective(z, y, cb0, &cb, penalty);
        while cobj < obj - 1e-12 * obj.abs() && t > 1e-10 {
            t *= 0.5;
            cb0 = b0 + t * (nb0 - b0);
            cb = std::array::from_fn(|k| b[k] + t * (nb[k] - b[k]));
            cobj = penalized_objective(z, y, cb0, &cb, penalty);
        }
        let change = (cb0 - b0).abs().max(cb.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
        b0 = cb0;
        b = cb;
        obj = cobj;
        trace.push(obj);
        if change < 1e-12 {
            converged = true;
            break;
        }
    }
    if !converged || !obj.is_finite() {
        let tail: Vec<String> = trace.iter().rev().take(5).map(|v| format!("{v:.10}")).collect();
        return Err(Error::NoConvergence {
            what: "lasso fit",
            detail: format!("objective trace (latest first): {}", tail.join(", ")),
        });
    }

    let coefficients: FeatureVec = std::array::from_fn(|k| {
        if st.scales[k] > 0.0 {
            b[k] / st.scales[k]
        } else {
            0.0
        }
    });
    let intercept = b0 - (0..N_FEATURES).map(|k| coefficients[k] * st.means[k]).sum::<f64>();
    Ok(LassoModel {
        intercept,
        coefficients,
        penalty,
        means: st.means,
        scales: st.scales,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoTuning {
    pub grid: Vec<f64>,
    /// Mean out-of-fold deviance per row, per grid point.
    pub cv_deviance: Vec<f64>,
    pub best: f64,
    pub folds: usize,
}

pub const LASSO_GRID_POINTS: usize = 50;
pub const LASSO_GRID_RATIO: f64 = 1e-3;

/// Log-spaced penalties from the all-zero penalty down by `LASSO_GRID_RATIO`.
pub fn lasso_grid(set: &TrainingSet) -> Vec<f64> {
    let top = penalty_max(set);
    if top <= 0.0 {
        return vec![0.0];
    }
    let (hi, lo) = (top.ln(), (top * LASSO_GRID_RATIO).ln());
    (0..LASSO_GRID_POINTS)
        .map(|i| (hi + (lo - hi) * i as f64 / (LASSO_GRID_POINTS - 1) as f64).exp())
        .collect()
}

/// K-fold cross-validated penalty. When some training part would have a
/// constant response the fold count is lowered until none does; if even two
/// folds fail, the largest penalty is returned.
pub fn tune_lasso(set: &TrainingSet, folds: usize, seed: u64) -> Result<LassoTuning> {
    set.check(folds.max(2))?;
    let grid = lasso_grid(set);
    let Some((k, assignment)) = usable_folds(set, folds, seed) else {
        return Ok(LassoTuning {
            best: grid[0],
            cv_deviance: vec![f64::NAN; grid.len()],
            grid,
            folds: 0,
        });
    };
    let parts = fold_indices(&assignment, k);
    let per_fold: Vec<Vec<f64>> = parts
        .par_iter()
        .map(|(train, test)| {
            let tr = set.subset(train);
            let te = set.subset(test);
            grid.iter()
                .map(|&pen| {
                    let m = fit_lasso(&tr, pen)?;
                    Ok(poisson_deviance(&te.y, &m.predict_all(&te.x)))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let n = set.len() as f64;
    let cv_deviance: Vec<f64> = (0..grid.len())
        .map(|g| per_fold.iter().map(|f| f[g]).sum::<f64>() / n)
        .collect();
    // First minimum along the grid, i.e. the largest penalty among ties.
    let mut best_i = 0;
    for (i, d) in cv_deviance.iter().enumerate() {
        if *d < cv_deviance[best_i] {
            best_i = i;
        }
    }
    Ok(LassoTuning {
        best: grid[best_i],
        grid,
        cv_deviance,
        folds: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TrainingSet {
        let x: Vec<FeatureVec> = (0..30)
            .map(|i| {
                let t = i as f64 / 10.0 - 1.5;
                [t, (i % 3) as f64, 0.0, 0.5 * t * t, 1.0, 0.0, (i % 5) as f64, -t]
            })
            .collect();
        let y = (0..30).map(|i| ((i * 7) % 5) as f64).collect();
        TrainingSet::new(x, y)
    }

    #[test]
    fn large_penalty_is_intercept_only() {
        let set = toy();
        let m = fit_lasso(&set, 1e6).unwrap();
        assert!(m.coefficients.iter().all(|c| *c == 0.0));
        assert!((m.intercept - set.mean_response().ln()).abs() < 1e-12);
        let at_max = fit_lasso(&set, penalty_max(&set)).unwrap();
        assert!(at_max.coefficients.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn constant_columns_get_zero() {
        let m = fit_lasso(&toy(), 0.5).unwrap();
        assert_eq!(m.coefficients[2], 0.0);
        assert_eq!(m.coefficients[4], 0.0);
    }

    #[test]
    fn kkt_conditions_hold() {
        let set = toy();
        let pen = 0.3 * penalty_max(&set);
        let m = fit_lasso(&set, pen).unwrap();
        let st = standardize(&set.x);
        let b = m.standardized_coefficients();
        for k in [0usize, 1, 3, 5, 6, 7] {
            let g: f64 = st
                .z
                .iter()
                .zip(&set.x)
                .zip(&set.y)
                .map(|((z, x), y)| z[k] * (y - m.predict(x)))
                .sum();
            if b[k] != 0.0 {
                assert!((g - pen * b[k].signum()).abs() < 1e-6, "k={k} g={g}");
            } else {
                assert!(g.abs() <= pen + 1e-6, "k={k} g={g}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_lasso(&toy(), -1.0).is_err());
        let zero = TrainingSet::new(vec![[0.0; 8]; 3], vec![0.0; 3]);
        assert!(fit_lasso(&zero, 1.0).is_err());
        let one = TrainingSet::new(vec![[0.0; 8]], vec![1.0]);
        assert!(fit_lasso(&one, 1.0).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = lasso_grid(&toy());
        assert_eq!(g.len(), LASSO_GRID_POINTS);
        assert!((g[49] / g[0] - LASSO_GRID_RATIO).abs() < 1e-12);
    }
}
