//! Convex combination of the three goal models, forecast metrics,
//! leave-one-tournament-out evaluation, weight tuning and permutation
//! importance.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{csv_reader, display_name, match_pairs, FeatureDiffRow, FeatureVec, TeamId, FEATURE_NAMES, N_FEATURES};
use crate::error::{Error, Result};
use crate::match_prob::{outcome_probs, MatchIntensities, MIN_INTENSITY};
use crate::predictors::boosting::BoostTuning;
use crate::predictors::forest::ForestTuning;
use crate::predictors::lasso::LassoTuning;
use crate::predictors::{
    fit_boosted, fit_forest, fit_lasso, tune_boosted, tune_forest, tune_lasso, BoostGrid, BoostParams,
    BoostedModel, ForestModel, ForestParams, GoalModel, LassoModel, TrainingSet,
};
use crate::simulator::replication_rng;

pub const MEMBER_NAMES: [&str; 3] = ["lasso", "forest", "xgboost"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedModel {
    pub weights: [f64; 3],
    pub lasso: Option<LassoModel>,
    pub forest: Option<ForestModel>,
    pub boosted: Option<BoostedModel>,
}

pub fn check_weights(w: &[f64; 3]) -> Result<()> {
    if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!("weights must be non-negative, got {w:?}")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("weights must sum to 1, got {s}")));
    }
    Ok(())
}

/// `sum w_m lambda_m`, clamped below at the minimum intensity.
pub fn combine(weights: &[f64; 3], members: &[f64; 3]) -> f64 {
    weights
        .iter()
        .zip(members)
        .filter(|(w, _)| **w != 0.0)
        .map(|(w, m)| w * m)
        .sum::<f64>()
        .max(MIN_INTENSITY)
}

impl CombinedModel {
    pub fn new(
        weights: [f64; 3],
        lasso: Option<LassoModel>,
        forest: Option<ForestModel>,
        boosted: Option<BoostedModel>,
    ) -> Result<Self> {
        check_weights(&weights)?;
        let present = [lasso.is_some(), forest.is_some(), boosted.is_some()];
        for m in 0..3 {
            if weights[m] > 0.0 && !present[m] {
                return Err(Error::InvalidInput(format!(
                    "weight {} on the {} model, which is not fitted",
                    weights[m], MEMBER_NAMES[m]
                )));
            }
        }
        Ok(CombinedModel {
            weights,
            lasso,
            forest,
            boosted,
        })
    }

    /// Member predictions; absent members give NaN.
    pub fn member_predictions(&self, diff: &FeatureVec) -> [f64; 3] {
        [
            self.lasso.as_ref().map_or(f64::NAN, |m| m.predict(diff)),
            self.forest.as_ref().map_or(f64::NAN, |m| m.predict(diff)),
            self.boosted.as_ref().map_or(f64::NAN, |m| m.predict(diff)),
        ]
    }
}

impl GoalModel for CombinedModel {
    fn predict(&self, diff: &FeatureVec) -> f64 {
        combine(&self.weights, &self.member_predictions(diff))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Win1,
    Draw,
    Win2,
}

impl Outcome {
    pub fn from_goals(g1: u32, g2: u32) -> Self {
        match g1.cmp(&g2) {
            std::cmp::Ordering::Greater => Outcome::Win1,
            std::cmp::Ordering::Equal => Outcome::Draw,
            std::cmp::Ordering::Less => Outcome::Win2,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub ml: f64,
    pub cr: f64,
    pub rps: f64,
}

/// Predicted class; a draw wins every tie for the maximum, and so does an
/// exact tie between the two wins.
pub fn predicted_outcome(p: &[f64; 3]) -> Outcome {
    let max = p[0].max(p[1]).max(p[2]);
    if p[1] == max || p[0] == p[2] {
        Outcome::Draw
    } else if p[0] == max {
        Outcome::Win1
    } else {
        Outcome::Win2
    }
}

pub fn match_metrics(p: &[f64; 3], outcome: Outcome) -> Result<MatchScore> {
    if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("not a probability vector: {p:?}")));
    }
    let o = outcome.index();
    let mut rps = 0.0;
    let (mut cp, mut cd) = (0.0, 0.0);
    for r in 0..2 {
        cp += p[r];
        cd += if r == o { 1.0 } else { 0.0 };
        rps += (cp - cd).powi(2);
    }
    Ok(MatchScore {
        ml: p[o],
        cr: if predicted_outcome(p) == outcome { 1.0 } else { 0.0 },
        rps: rps / 2.0,
    })
}

/// Per-team absolute goal errors and the absolute goal-difference error.
pub fn mae_metrics(actual: (u32, u32), predicted: (f64, f64)) -> ([f64; 2], f64) {
    let (g1, g2) = (actual.0 as f64, actual.1 as f64);
    (
        [(g1 - predicted.0).abs(), (g2 - predicted.1).abs()],
        ((g1 - g2) - (predicted.0 - predicted.1)).abs(),
    )
}

/// Three-way odds to probabilities, spreading the margin proportionally.
pub fn bookmaker_baseline(odds: &[f64; 3]) -> Result<[f64; 3]> {
    if odds.iter().any(|o| !(*o > 1.0 && o.is_finite())) {
        return Err(Error::InvalidInput(format!("odds must exceed 1, got {odds:?}")));
    }
    let inv = odds.map(|o| 1.0 / o);
    let c: f64 = inv.iter().sum();
    Ok(inv.map(|v| v / c))
}

pub const MATCH_ODDS_HEADER: [&str; 5] = ["year", "match_index", "odds_win1", "odds_draw", "odds_win2"];

/// Three-way odds keyed by (tournament year, match index).
pub type MatchOdds = BTreeMap<(i32, usize), [f64; 3]>;

pub fn load_match_odds(path: &Path) -> Result<MatchOdds> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_match_odds(f, &display_name(path))
}

pub fn read_match_odds<R: Read>(input: R, name: &str) -> Result<MatchOdds> {
    let mut rdr = csv_reader(input, name, &MATCH_ODDS_HEADER)?;
    let mut out = MatchOdds::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(name, row, e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| Error::row(name, row, format!("{}: cannot parse '{}'", MATCH_ODDS_HEADER[k], &rec[k])))
        };
        let year: i32 = rec[0].parse().map_err(|_| Error::row(name, row, "year: not an integer"))?;
        let idx: usize = rec[1].parse().map_err(|_| Error::row(name, row, "match_index: not an integer"))?;
        let odds = [num(2)?, num(3)?, num(4)?];
        bookmaker_baseline(&odds).map_err(|e| Error::row(name, row, e.to_string()))?;
        if out.insert((year, idx), odds).is_some() {
            return Err(Error::row(name, row, format!("duplicate odds for match {idx} of {year}")));
        }
    }
    Ok(out)
}

/// Bookmaker baseline metrics over the held-out matches.
pub fn baseline_report(held_out: &[HeldOutMatch], odds: &MatchOdds) -> Result<MetricReport> {
    let mut probs = Vec::with_capacity(held_out.len());
    let mut outcomes = Vec::with_capacity(held_out.len());
    for m in held_out {
        let o = odds.get(&(m.year, m.match_index)).ok_or_else(|| {
            Error::InvalidInput(format!("no three-way odds for match {} of {}", m.match_index, m.year))
        })?;
        probs.push(bookmaker_baseline(o)?);
        outcomes.push(m.outcome());
    }
    MetricReport::from_probabilities(&probs, &outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ml: f64,
    pub cr: f64,
    pub rps: f64,
    /// Absent for probability-only forecasts such as bookmaker odds.
    pub mae_goals: Option<f64>,
    pub mae_goaldiff: Option<f64>,
    pub n_matches: usize,
}

/// One match with its result and a forecast of both intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchForecast {
    pub goals: (u32, u32),
    pub lambda: (f64, f64),
}

impl MetricReport {
    pub fn from_forecasts(matches: &[MatchForecast]) -> Result<Self> {
        if matches.is_empty() {
            return Err(Error::InvalidInput("no matches to evaluate".into()));
        }
        let n = matches.len() as f64;
        let (mut ml, mut cr, mut rps, mut mg, mut md) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for m in matches {
            let p = outcome_probs(MatchIntensities::new(m.lambda.0, m.lambda.1)).as_array();
            let s = match_metrics(&p, Outcome::from_goals(m.goals.0, m.goals.1))?;
            ml += s.ml;
            cr += s.cr;
            rps += s.rps;
            let (g, d) = mae_metrics(m.goals, m.lambda);
            mg += g[0] + g[1];
            md += d;
        }
        Ok(MetricReport {
            ml: ml / n,
            cr: cr / n,
            rps: rps / n,
            mae_goals: Some(mg / (2.0 * n)),
            mae_goaldiff: Some(md / n),
            n_matches: matches.len(),
        })
    }

    pub fn from_probabilities(probs: &[[f64; 3]], outcomes: &[Outcome]) -> Result<Self> {
        if probs.is_empty() || probs.len() != outcomes.len() {
            return Err(Error::InvalidInput("need one outcome per forecast".into()));
        }
        let n = probs.len() as f64;
        let mut acc = [0.0; 3];
        for (p, o) in probs.iter().zip(outcomes) {
            let s = match_metrics(p, *o)?;
            acc[0] += s.ml;
            acc[1] += s.cr;
            acc[2] += s.rps;
        }
        Ok(MetricReport {
            ml: acc[0] / n,
            cr: acc[1] / n,
            rps: acc[2] / n,
            mae_goals: None,
            mae_goaldiff: None,
            n_matches: probs.len(),
        })
    }
}

/// Tuning and fitting choices for the three members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub folds: usize,
    pub forest: ForestParams,
    pub tune_forest: bool,
    pub boost_grid: BoostGrid,
    pub seed: u64,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        PipelineSpec {
            folds: 10,
            forest: ForestParams::default(),
            tune_forest: true,
            boost_grid: BoostGrid::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningLog {
    pub lasso: LassoTuning,
    pub forest: Option<ForestTuning>,
    pub boosted: BoostTuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedMembers {
    pub lasso: LassoModel,
    pub forest: ForestModel,
    pub boosted: BoostedModel,
    pub tuning: TuningLog,
}

impl FittedMembers {
    pub fn combined(&self, weights: [f64; 3]) -> Result<CombinedModel> {
        CombinedModel::new(
            weights,
            Some(self.lasso.clone()),
            Some(self.forest.clone()),
            Some(self.boosted.clone()),
        )
    }
}

/// Tunes each member by cross-validation on `set` and refits on all of it.
pub fn fit_members(set: &TrainingSet, spec: &PipelineSpec) -> Result<FittedMembers> {
    let lasso_t = tune_lasso(set, spec.folds, spec.seed)?;
    let lasso = fit_lasso(set, lasso_t.best)?;
    let forest_params = ForestParams {
        seed: spec.seed,
        ..spec.forest
    };
    let (forest_t, mtry) = if spec.tune_forest {
        let t = tune_forest(set, &forest_params, spec.folds)?;
        let best = t.best;
        (Some(t), best)
    } else {
        (None, forest_params.mtry)
    };
    let forest = fit_forest(set, &ForestParams { mtry, ..forest_params })?;
    let boost_t = tune_boosted(set, &spec.boost_grid, spec.folds, spec.seed)?;
    let boosted = fit_boosted(set, &boost_t.best)?;
    Ok(FittedMembers {
        lasso,
        forest,
        boosted,
        tuning: TuningLog {
            lasso: lasso_t,
            forest: forest_t,
            boosted: boost_t,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutMatch {
    pub year: i32,
    pub match_index: usize,
    pub team1: TeamId,
    pub team2: TeamId,
    pub goals: (u32, u32),
    /// Per member, predicted goals of team 1 and team 2.
    pub members: [(f64, f64); 3],
}

impl HeldOutMatch {
    pub fn forecast(&self, weights: &[f64; 3]) -> MatchForecast {
        let l1 = combine(weights, &self.members.map(|m| m.0));
        let l2 = combine(weights, &self.members.map(|m| m.1));
        MatchForecast {
            goals: self.goals,
            lambda: (l1, l2),
        }
    }

    pub fn outcome(&self) -> Outcome {
        Outcome::from_goals(self.goals.0, self.goals.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotoFold {
    pub year: i32,
    pub train_rows: usize,
    pub test_matches: usize,
    pub lasso_penalty: f64,
    pub mtry: usize,
    pub boost: BoostParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotoResult {
    pub folds: Vec<LotoFold>,
    pub held_out: Vec<HeldOutMatch>,
}

impl LotoResult {
    /// Pooled metrics of one weighting over all held-out matches.
    pub fn report(&self, weights: &[f64; 3]) -> Result<MetricReport> {
        let f: Vec<MatchForecast> = self.held_out.iter().map(|m| m.forecast(weights)).collect();
        MetricReport::from_forecasts(&f)
    }

    pub fn member_reports(&self) -> Result<[MetricReport; 3]> {
        Ok([
            self.report(&[1.0, 0.0, 0.0])?,
            self.report(&[0.0, 1.0, 0.0])?,
            self.report(&[0.0, 0.0, 1.0])?,
        ])
    }
}

/// Leave-one-tournament-out: each edition is predicted by members tuned and
/// fitted on all other editions. Dataset rows must come in match pairs.
pub fn loto_cv(rows: &[FeatureDiffRow], spec: &PipelineSpec) -> Result<LotoResult> {
    let mut by_year: BTreeMap<i32, Vec<FeatureDiffRow>> = BTreeMap::new();
    for r in rows {
        by_year.entry(r.year).or_default().push(r.clone());
    }
    if by_year.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "leave-one-tournament-out needs at least two tournaments, got {}",
            by_year.len()
        )));
    }
    let mut folds = Vec::new();
    let mut held_out = Vec::new();
    for (&year, test_rows) in &by_year {
        let pairs = match_pairs(test_rows)?;
        if pairs.is_empty() {
            return Err(Error::InvalidInput(format!("tournament {year} has no matches")));
        }
        let train_rows: Vec<FeatureDiffRow> = rows.iter().filter(|r| r.year != year).cloned().collect();
        let train = TrainingSet::from_rows(&train_rows);
        let members = fit_members(&train, spec)?;
        folds.push(LotoFold {
            year,
            train_rows: train.len(),
            test_matches: pairs.len(),
            lasso_penalty: members.lasso.penalty,
            mtry: members.forest.params.mtry,
            boost: members.boosted.params,
        });
        let models: [&dyn GoalModel; 3] = [&members.lasso, &members.forest, &members.boosted];
        for (a, b) in pairs {
            held_out.push(HeldOutMatch {
                year,
                match_index: a.match_index,
                team1: a.team.clone(),
                team2: b.team.clone(),
                goals: (a.goals, b.goals),
                members: models.map(|m| (m.predict(&a.diff), m.predict(&b.diff))),
            });
        }
    }
    Ok(LotoResult { folds, held_out })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGridEntry {
    pub weights: [f64; 3],
    pub metrics: MetricReport,
    pub ml_norm: f64,
    pub cr_norm: f64,
    pub rps_norm: f64,
    pub avg_norm: f64,
}

pub const WEIGHT_STEPS: usize = 20;

/// All weight triples on the simplex with step 1/20, lexicographic order.
pub fn weight_grid() -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for a in 0..=WEIGHT_STEPS {
        for b in 0..=WEIGHT_STEPS - a {
            let c = WEIGHT_STEPS - a - b;
            out.push([a, b, c].map(|v| v as f64 / WEIGHT_STEPS as f64));
        }
    }
    out
}

/// Min-max scaling to [0, 100]; larger is better when `higher_better`.
/// A constant column scores 100 everywhere.
fn normalize(values: &[f64], higher_better: bool) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| {
            if max == min {
                100.0
            } else if higher_better {
                100.0 * (v - min) / (max - min)
            } else {
                100.0 * (max - v) / (max - min)
            }
        })
        .collect()
}

/// Scores every grid weighting on the held-out matches and ranks by the
/// mean normalized score; ties by larger ML, then ascending weights.
pub fn tune_weights(held_out: &[HeldOutMatch]) -> Result<Vec<WeightGridEntry>> {
    let grid = weight_grid();
    let reports: Vec<MetricReport> = grid
        .par_iter()
        .map(|w| {
            let f: Vec<MatchForecast> = held_out.iter().map(|m| m.forecast(w)).collect();
            MetricReport::from_forecasts(&f)
        })
        .collect::<Result<_>>()?;
    let ml = normalize(&reports.iter().map(|r| r.ml).collect::<Vec<_>>(), true);
    let cr = normalize(&reports.iter().map(|r| r.cr).collect::<Vec<_>>(), true);
    let rps = normalize(&reports.iter().map(|r| r.rps).collect::<Vec<_>>(), false);
    let mut entries: Vec<WeightGridEntry> = grid
        .into_iter()
        .zip(reports)
        .enumerate()
        .map(|(i, (weights, metrics))| WeightGridEntry {
            weights,
            metrics,
            ml_norm: ml[i],
            cr_norm: cr[i],
            rps_norm: rps[i],
            avg_norm: (ml[i] + cr[i] + rps[i]) / 3.0,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.avg_norm
            .total_cmp(&a.avg_norm)
            .then(b.metrics.ml.total_cmp(&a.metrics.ml))
            .then_with(|| {
                a.weights
                    .iter()
                    .zip(&b.weights)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    Ok(entries)
}

pub fn write_weight_grid<W: Write>(out: W, entries: &[WeightGridEntry]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(["w_lasso", "w_forest", "w_xgboost", "ml", "cr", "rps", "ml_norm", "cr_norm", "rps_norm", "avg_norm"])
        .map_err(err)?;
    for e in entries {
        let mut rec: Vec<String> = e.weights.iter().map(|w| format!("{w:.2}")).collect();
        rec.extend([e.metrics.ml, e.metrics.cr, e.metrics.rps].iter().map(|v| format!("{v:.4}")));
        rec.extend([e.ml_norm, e.cr_norm, e.rps_norm, e.avg_norm].iter().map(|v| format!("{v:.2}")));
        wtr.write_record(&rec).map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<output>", e))
}

/// `model,ml,cr,rps,mae_goals,mae_goaldiff`, blank where undefined.
pub fn write_metric_table<W: Write>(out: W, rows: &[(String, MetricReport)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(["model", "ml", "cr", "rps", "mae_goals", "mae_goaldiff"]).map_err(err)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for (name, r) in rows {
        wtr.write_record([
            name.clone(),
            format!("{:.4}", r.ml),
            format!("{:.4}", r.cr),
            format!("{:.4}", r.rps),
            opt(r.mae_goals),
            opt(r.mae_goaldiff),
        ])
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<output>", e))
}

/// How a column is shuffled in [`permutation_importance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Permutation {
    Random,
    /// Leaves the column in place; every importance is then exactly 0.
    Identity,
}

fn mae_goals(model: &dyn GoalModel, x: &[FeatureVec], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(d, g)| (g - model.predict(d)).abs()).sum::<f64>() / y.len() as f64
}

/// Mean increase of the in-sample goal MAE when one covariate is shuffled
/// across rows. Repeat `r` of feature `k` uses stream `k * repeats + r`.
pub fn permutation_importance(
    model: &dyn GoalModel,
    set: &TrainingSet,
    repeats: usize,
    seed: u64,
    mode: Permutation,
) -> Result<[f64; N_FEATURES]> {
    if set.is_empty() || repeats == 0 {
        return Err(Error::InvalidInput("need rows and at least one repeat".into()));
    }
    let base = mae_goals(model, &set.x, &set.y);
    let imp: Vec<f64> = (0..N_FEATURES)
        .into_par_iter()
        .map(|k| {
            let mut total = 0.0;
            for r in 0..repeats {
                let mut col: Vec<f64> = set.x.iter().map(|x| x[k]).collect();
                if mode == Permutation::Random {
                    let mut rng = replication_rng(seed, (k * repeats + r) as u64);
                    col.shuffle(&mut rng);
                }
                let x: Vec<FeatureVec> = set
                    .x
                    .iter()
                    .zip(&col)
                    .map(|(x, v)| {
                        let mut x = *x;
                        x[k] = *v;
                        x
                    })
                    .collect();
                total += mae_goals(model, &x, &set.y) - base;
            }
            total / repeats as f64
        })
        .collect();
    Ok(imp.try_into().expect("eight features"))
}

pub fn write_importance<W: Write>(out: W, importance: &[f64; N_FEATURES]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(["feature", "importance"]).map_err(err)?;
    let mut order: Vec<usize> = (0..N_FEATURES).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    for k in order {
        wtr.write_record([FEATURE_NAMES[k].to_string(), format!("{:.4}", importance[k])])
            .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<output>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Const(f64);
    impl GoalModel for Const {
        fn predict(&self, _: &FeatureVec) -> f64 {
            self.0
        }
    }

    #[test]
    fn combine_examples() {
        assert!((combine(&[0.15, 0.85, 0.0], &[1.0, 2.0, 5.0]) - 1.85).abs() < 1e-15);
        assert_eq!(combine(&[1.0, 0.0, 0.0], &[1.3, f64::NAN, f64::NAN]), 1.3);
        let t = 1.0 / 3.0;
        assert!((combine(&[t, t, t], &[0.8, 0.8, 0.8]) - 0.8).abs() < 1e-15);
        assert_eq!(combine(&[1.0, 0.0, 0.0], &[0.0, 1.0, 1.0]), MIN_INTENSITY);
    }

    #[test]
    fn missing_member_with_weight_rejected() {
        assert!(CombinedModel::new([0.5, 0.5, 0.0], None, None, None).is_err());
        assert!(CombinedModel::new([0.5, 0.6, -0.1], None, None, None).is_err());
    }

    #[test]
    fn metric_examples() {
        let s = match_metrics(&[1.0, 0.0, 0.0], Outcome::Win1).unwrap();
        assert_eq!((s.ml, s.cr, s.rps), (1.0, 1.0, 0.0));
        let t = 1.0 / 3.0;
        let u = match_metrics(&[t, t, t], Outcome::Win1).unwrap();
        assert!((u.rps - 5.0 / 18.0).abs() < 1e-12);
        let v = match_metrics(&[0.5, 0.3, 0.2], Outcome::Draw).unwrap();
        assert_eq!((v.ml, v.cr), (0.3, 0.0));
        assert!(match_metrics(&[0.5, 0.3, 0.3], Outcome::Draw).is_err());
    }

    #[test]
    fn ties_go_to_the_draw() {
        assert_eq!(predicted_outcome(&[0.4, 0.4, 0.2]), Outcome::Draw);
        assert_eq!(predicted_outcome(&[0.4, 0.2, 0.4]), Outcome::Draw);
        assert_eq!(predicted_outcome(&[0.2, 0.3, 0.5]), Outcome::Win2);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae_metrics((2, 1), (2.0, 1.0)), ([0.0, 0.0], 0.0));
        assert_eq!(mae_metrics((3, 0), (1.5, 1.5)), ([1.5, 1.5], 3.0));
        let a = MetricReport::from_forecasts(&[MatchForecast { goals: (3, 1), lambda: (1.2, 0.7) }]).unwrap();
        let b = MetricReport::from_forecasts(&[MatchForecast { goals: (1, 3), lambda: (0.7, 1.2) }]).unwrap();
        assert_eq!(a.mae_goals, b.mae_goals);
        assert_eq!(a.mae_goaldiff, b.mae_goaldiff);
    }

    #[test]
    fn baseline_examples() {
        let t = bookmaker_baseline(&[2.0, 2.0, 2.0]).unwrap();
        assert!(t.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(bookmaker_baseline(&[2.0, 4.0, 4.0]).unwrap(), [0.5, 0.25, 0.25]);
        let p = bookmaker_baseline(&[1.9, 3.6, 4.2]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(bookmaker_baseline(&[1.0, 3.0, 3.0]).is_err());
    }

    #[test]
    fn grid_size_and_sums() {
        let g = weight_grid();
        assert_eq!(g.len(), 231);
        assert!(g.iter().all(|w| (w.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn identity_permutation_is_zero() {
        let x: Vec<FeatureVec> = (0..20).map(|i| [i as f64; 8]).collect();
        let set = TrainingSet::new(x, (0..20).map(|i| (i % 4) as f64).collect());
        let imp = permutation_importance(&Const(1.2), &set, 1, 1, Permutation::Identity).unwrap();
        assert!(imp.iter().all(|v| *v == 0.0));
        let imp = permutation_importance(&Const(1.2), &set, 5, 1, Permutation::Random).unwrap();
        assert!(imp.iter().all(|v| v.abs() < 1e-12));
    }
}
