//! Team strengths from weighted historic international results.
//!
//! Goals of the two sides of a match are independent Poisson counts with
//! `log λ = β0 + (r_i - r_j) + h · 1(home)`. Each match enters the
//! likelihood raised to a weight that decays with age and grows with the
//! importance of the fixture. Abilities are identified by `Σ r_i = 0`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{MatchRecord, MatchType, TeamId};
use crate::error::{Error, Result};

/// Three years of 365.25 days.
pub const DEFAULT_HALF_PERIOD_DAYS: f64 = 1095.75;
pub const DEFAULT_WINDOW_YEARS: f64 = 8.0;
const DAYS_PER_YEAR: f64 = 365.25;
/// Log-scale estimates beyond this mean the maximum lies at infinity
/// (e.g. a team that never scored).
const MAX_ABS_PARAMETER: f64 = 8.0;

/// `(1/2)^(days_ago / half_period_days)`.
pub fn time_weight(days_ago: f64, half_period_days: f64) -> Result<f64> {
    if !(days_ago >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "days_ago must be non-negative, got {days_ago}"
        )));
    }
    if !(half_period_days > 0.0) {
        return Err(Error::InvalidInput(format!(
            "half period must be positive, got {half_period_days}"
        )));
    }
    Ok(0.5f64.powf(days_ago / half_period_days))
}

pub fn type_weight(match_type: MatchType) -> f64 {
    match match_type {
        MatchType::WorldCup => 4.0,
        MatchType::ConfederationTournament => 3.0,
        MatchType::Qualifier => 2.5,
        MatchType::FriendlyOther => 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchWeight {
    pub w_time: f64,
    pub w_type: f64,
    pub w: f64,
}

impl MatchWeight {
    pub fn new(days_ago: f64, half_period_days: f64, match_type: MatchType) -> Result<Self> {
        let w_time = time_weight(days_ago, half_period_days)?;
        let w_type = type_weight(match_type);
        Ok(MatchWeight {
            w_time,
            w_type,
            w: w_time * w_type,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomeAdvantage {
    Shared,
    PerTeam,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistAbilityConfig {
    pub half_period_days: f64,
    pub window_years: f64,
    pub home_advantage: HomeAdvantage,
    /// Ridge toward zero for teams whose summed match weight is below
    /// `sparse_threshold`. `None` disables it.
    pub sparse_ridge: Option<f64>,
    pub sparse_threshold: f64,
    /// Optional per-match weight multiplier; used to check scale invariance.
    pub weight_scale: f64,
    pub max_iter: usize,
    pub gradient_tol: f64,
}

impl Default for HistAbilityConfig {
    fn default() -> Self {
        HistAbilityConfig {
            half_period_days: DEFAULT_HALF_PERIOD_DAYS,
            window_years: DEFAULT_WINDOW_YEARS,
            home_advantage: HomeAdvantage::Shared,
            sparse_ridge: None,
            sparse_threshold: 5.0,
            weight_scale: 1.0,
            max_iter: 100,
            gradient_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HomeEffects {
    Shared(f64),
    PerTeam(BTreeMap<TeamId, f64>),
}

impl HomeEffects {
    pub fn for_team(&self, team: &TeamId) -> f64 {
        match self {
            HomeEffects::Shared(h) => *h,
            HomeEffects::PerTeam(m) => m.get(team).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistAbilityModel {
    pub intercept: f64,
    pub abilities: BTreeMap<TeamId, f64>,
    pub home_effects: HomeEffects,
    pub half_period_days: f64,
    pub reference_date: NaiveDate,
    pub matches_used: usize,
    pub iterations: usize,
    /// Norm of the weighted log-likelihood gradient at the returned point.
    pub gradient_norm: f64,
}

impl HistAbilityModel {
    pub fn ability(&self, team: &TeamId) -> Option<f64> {
        self.abilities.get(team).copied()
    }

    /// Expected goals of `team` and `opponent`; `team_at_home` switches on
    /// the team's home effect.
    pub fn expected_goals(&self, team: &TeamId, opponent: &TeamId, team_at_home: bool) -> Option<(f64, f64)> {
        let ri = self.ability(team)?;
        let rj = self.ability(opponent)?;
        let h = if team_at_home { self.home_effects.for_team(team) } else { 0.0 };
        Some((
            (self.intercept + ri - rj + h).exp(),
            (self.intercept + rj - ri).exp(),
        ))
    }

    /// Teams by descending ability.
    pub fn ranking(&self) -> Vec<(TeamId, f64)> {
        let mut v: Vec<(TeamId, f64)> = self.abilities.iter().map(|(t, r)| (t.clone(), *r)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    pub fn write_ranking_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::InvalidInput(e.to_string());
        wtr.write_record(["team", "ability"]).map_err(err)?;
        for (t, r) in self.ranking() {
            wtr.write_record([t.0, format!("{r:.6}")]).map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::io("<output>", e))
    }
}

/// One Poisson goal observation in sparse form.
struct Obs {
    goals: f64,
    weight: f64,
    team: usize,
    opponent: usize,
    home: Option<usize>,
}

/// Parameter layout: `[β0, r_0 .. r_{n-1}, h ...]`.
struct Layout {
    n_teams: usize,
    n_home: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        1 + self.n_teams + self.n_home
    }
    fn r(&self, i: usize) -> usize {
        1 + i
    }
    fn h(&self, k: usize) -> usize {
        1 + self.n_teams + k
    }
}

pub fn fit_hist_abilities(
    matches: &[MatchRecord],
    reference_date: NaiveDate,
    config: &HistAbilityConfig,
) -> Result<HistAbilityModel> {
    let window_days = config.window_years * DAYS_PER_YEAR;
    let in_window: Vec<(&MatchRecord, f64)> = matches
        .iter()
        .filter_map(|m| {
            let days = (reference_date - m.date).num_days() as f64;
            (days >= 0.0 && days <= window_days).then_some((m, days))
        })
        .collect();
    if in_window.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no matches in the {} years before {reference_date}",
            config.window_years
        )));
    }

    let teams: BTreeSet<&TeamId> = in_window
        .iter()
        .flat_map(|(m, _)| [&m.home_team, &m.away_team])
        .collect();
    let teams: Vec<TeamId> = teams.into_iter().cloned().collect();
    let index = |t: &TeamId| teams.binary_search(t).expect("collected above");

    // Home parameters: one shared, or one per team that ever hosts.
    let hosts: BTreeSet<usize> = in_window
        .iter()
        .filter(|(m, _)| !m.neutral)
        .map(|(m, _)| index(&m.home_team))
        .collect();
    let home_slot: Vec<Option<usize>> = match config.home_advantage {
        HomeAdvantage::Shared => {
            let any = !hosts.is_empty();
            (0..teams.len()).map(|_| any.then_some(0)).collect()
        }
        HomeAdvantage::PerTeam => {
            let order: Vec<usize> = hosts.iter().copied().collect();
            (0..teams.len())
                .map(|i| order.binary_search(&i).ok())
                .collect()
        }
    };
    let n_home = home_slot.iter().flatten().copied().max().map_or(0, |k| k + 1);
    let layout = Layout {
        n_teams: teams.len(),
        n_home,
    };

    let mut obs = Vec::with_capacity(2 * in_window.len());
    let mut team_weight = vec![0.0; teams.len()];
    for (m, days) in &in_window {
        let w = MatchWeight::new(*days, config.half_period_days, m.match_type)?.w * config.weight_scale;
        let (hi, ai) = (index(&m.home_team), index(&m.away_team));
        team_weight[hi] += w;
        team_weight[ai] += w;
        obs.push(Obs {
            goals: m.goals_home as f64,
            weight: w,
            team: hi,
            opponent: ai,
            home: if m.neutral { None } else { home_slot[hi] },
        });
        obs.push(Obs {
            goals: m.goals_away as f64,
            weight: w,
            team: ai,
            opponent: hi,
            home: None,
        });
    }

    let ridge: Vec<f64> = team_weight
        .iter()
        .map(|tw| match config.sparse_ridge {
            Some(k) if *tw < config.sparse_threshold * config.weight_scale => k,
            _ => 0.0,
        })
        .collect();

    let total_w: f64 = obs.iter().map(|o| o.weight).sum();
    let mean_goals = obs.iter().map(|o| o.weight * o.goals).sum::<f64>() / total_w;
    let mut theta = DVector::zeros(layout.dim());
    theta[0] = mean_goals.max(1e-3).ln();

    let objective = |theta: &DVector<f64>| -> f64 {
        let mut f = 0.0;
        for o in &obs {
            let eta = linear_predictor(&layout, theta, o);
            f += o.weight * (o.goals * eta - eta.exp());
        }
        let sum_r: f64 = (0..layout.n_teams).map(|i| theta[layout.r(i)]).sum();
        f -= 0.5 * total_w * sum_r * sum_r;
        for i in 0..layout.n_teams {
            f -= 0.5 * ridge[i] * theta[layout.r(i)].powi(2);
        }
        f
    };

    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    for iter in 0..config.max_iter {
        iterations = iter + 1;
        let (grad_ll, mut neg_hess) = gradient_and_hessian(&layout, &theta, &obs);

        // Penalized gradient: the centering term vanishes once Σ r = 0.
        let sum_r: f64 = (0..layout.n_teams).map(|i| theta[layout.r(i)]).sum();
        let mut grad = grad_ll.clone();
        for i in 0..layout.n_teams {
            grad[layout.r(i)] -= total_w * sum_r + ridge[i] * theta[layout.r(i)];
            neg_hess[(layout.r(i), layout.r(i))] += ridge[i];
            for j in 0..layout.n_teams {
                neg_hess[(layout.r(i), layout.r(j))] += total_w;
            }
        }
        grad_norm = grad.norm();
        if grad_norm < config.gradient_tol * total_w.max(1.0) {
            converged = true;
            break;
        }

        let step = solve_spd(neg_hess, &grad)?;
        let f0 = objective(&theta);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &theta + &step * t;
            if objective(&candidate) >= f0 - 1e-12 * f0.abs() {
                theta = candidate;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        center(&layout, &mut theta);
        if theta.amax() > MAX_ABS_PARAMETER {
            break;
        }
    }
    center(&layout, &mut theta);
    let (grad_ll, _) = gradient_and_hessian(&layout, &theta, &obs);
    let mut final_grad = grad_ll;
    for i in 0..layout.n_teams {
        final_grad[layout.r(i)] -= ridge[i] * theta[layout.r(i)];
    }
    let final_norm = final_grad.norm();
    if !converged || !final_norm.is_finite() || theta.amax() > MAX_ABS_PARAMETER {
        return Err(Error::NoConvergence {
            what: "historic-ability fit",
            detail: format!(
                "gradient norm {:.3e} after {iterations} iterations",
                grad_norm.min(final_norm)
            ),
        });
    }

    let abilities = teams
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), theta[layout.r(i)]))
        .collect();
    let home_effects = match config.home_advantage {
        HomeAdvantage::Shared => HomeEffects::Shared(if n_home > 0 { theta[layout.h(0)] } else { 0.0 }),
        HomeAdvantage::PerTeam => HomeEffects::PerTeam(
            teams
                .iter()
                .enumerate()
                .filter_map(|(i, t)| home_slot[i].map(|k| (t.clone(), theta[layout.h(k)])))
                .collect(),
        ),
    };
    Ok(HistAbilityModel {
        intercept: theta[0],
        abilities,
        home_effects,
        half_period_days: config.half_period_days,
        reference_date,
        matches_used: in_window.len(),
        iterations,
        gradient_norm: final_norm,
    })
}

fn linear_predictor(layout: &Layout, theta: &DVector<f64>, o: &Obs) -> f64 {
    let mut eta = theta[0] + theta[layout.r(o.team)] - theta[layout.r(o.opponent)];
    if let Some(k) = o.home {
        eta += theta[layout.h(k)];
    }
    eta
}

fn gradient_and_hessian(layout: &Layout, theta: &DVector<f64>, obs: &[Obs]) -> (DVector<f64>, DMatrix<f64>) {
    let d = layout.dim();
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for o in obs {
        let lambda = linear_predictor(layout, theta, o).exp();
        let mut idx: [(usize, f64); 4] = [(0, 1.0), (layout.r(o.team), 1.0), (layout.r(o.opponent), -1.0), (0, 0.0)];
        let n = if let Some(k) = o.home {
            idx[3] = (layout.h(k), 1.0);
            4
        } else {
            3
        };
        let resid = o.weight * (o.goals - lambda);
        let curv = o.weight * lambda;
        for &(a, xa) in &idx[..n] {
            grad[a] += resid * xa;
            for &(b, xb) in &idx[..n] {
                hess[(a, b)] += curv * xa * xb;
            }
        }
    }
    (grad, hess)
}

fn center(layout: &Layout, theta: &mut DVector<f64>) {
    if layout.n_teams == 0 {
        return;
    }
    let mean = (0..layout.n_teams).map(|i| theta[layout.r(i)]).sum::<f64>() / layout.n_teams as f64;
    for i in 0..layout.n_teams {
        theta[layout.r(i)] -= mean;
    }
}

/// Solves `A x = b` for symmetric positive (semi)definite `A`, adding a
/// growing diagonal shift when the Cholesky factorization fails.
fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let scale = a.diagonal().amax().max(1.0);
    let mut shift = 1e-10 * scale;
    for _ in 0..12 {
        let shifted = &a + DMatrix::identity(a.nrows(), a.ncols()) * shift;
        if let Some(ch) = shifted.cholesky() {
            return Ok(ch.solve(b));
        }
        shift *= 10.0;
    }
    Err(Error::Numerical("information matrix is not positive definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn m(d: &str, h: &str, a: &str, gh: u32, ga: u32, neutral: bool) -> MatchRecord {
        MatchRecord {
            date: date(d),
            home_team: h.into(),
            away_team: a.into(),
            goals_home: gh,
            goals_away: ga,
            venue_country: h.into(),
            neutral,
            match_type: MatchType::FriendlyOther,
        }
    }

    #[test]
    fn time_weight_values() {
        assert_eq!(time_weight(0.0, DEFAULT_HALF_PERIOD_DAYS).unwrap(), 1.0);
        assert_eq!(time_weight(1095.75, 1095.75).unwrap(), 0.5);
        assert_eq!(time_weight(2191.5, 1095.75).unwrap(), 0.25);
        assert!(time_weight(-1.0, 1095.75).is_err());
        assert!(time_weight(1.0, 0.0).is_err());
    }

    #[test]
    fn type_weights() {
        assert_eq!(type_weight(MatchType::WorldCup), 4.0);
        assert_eq!(type_weight(MatchType::ConfederationTournament), 3.0);
        assert_eq!(type_weight(MatchType::Qualifier), 2.5);
        assert_eq!(type_weight(MatchType::FriendlyOther), 1.0);
        let w = MatchWeight::new(1095.75, 1095.75, MatchType::WorldCup).unwrap();
        assert_eq!(w.w, w.w_time * w.w_type);
        assert_eq!(w.w, 2.0);
    }

    #[test]
    fn symmetric_draw_gives_zero_abilities() {
        let fit = fit_hist_abilities(
            &[m("2024-01-10", "A", "B", 1, 1, true)],
            date("2024-06-01"),
            &HistAbilityConfig::default(),
        )
        .unwrap();
        assert!(fit.intercept.abs() < 1e-10);
        for r in fit.abilities.values() {
            assert!(r.abs() < 1e-10);
        }
        assert_eq!(fit.home_effects, HomeEffects::Shared(0.0));
    }

    #[test]
    fn empty_window_is_error() {
        let err = fit_hist_abilities(
            &[m("2010-01-10", "A", "B", 1, 1, true)],
            date("2024-06-01"),
            &HistAbilityConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        // matches after the reference date are ignored too
        assert!(fit_hist_abilities(
            &[m("2025-01-10", "A", "B", 1, 1, true)],
            date("2024-06-01"),
            &HistAbilityConfig::default(),
        )
        .is_err());
    }

    #[test]
    fn goalless_team_does_not_converge() {
        let matches: Vec<_> = (0..5).map(|_| m("2024-01-10", "A", "B", 2, 0, true)).collect();
        let err = fit_hist_abilities(&matches, date("2024-06-01"), &HistAbilityConfig::default()).unwrap_err();
        match err {
            Error::NoConvergence { detail, .. } => assert!(detail.contains("gradient norm")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sparse_ridge_shrinks() {
        let matches = vec![
            m("2024-01-10", "A", "B", 2, 1, true),
            m("2024-01-12", "B", "C", 1, 1, true),
            m("2024-01-14", "C", "A", 0, 1, true),
        ];
        let plain = fit_hist_abilities(&matches, date("2024-06-01"), &HistAbilityConfig::default()).unwrap();
        let cfg = HistAbilityConfig {
            sparse_ridge: Some(5.0),
            ..Default::default()
        };
        let shrunk = fit_hist_abilities(&matches, date("2024-06-01"), &cfg).unwrap();
        let a = TeamId::from("A");
        assert!(shrunk.ability(&a).unwrap().abs() < plain.ability(&a).unwrap().abs());
    }

    #[test]
    fn per_team_home_effects() {
        let matches = vec![
            m("2024-01-10", "A", "B", 2, 1, false),
            m("2024-02-10", "B", "A", 2, 0, false),
            m("2024-03-10", "A", "B", 1, 1, true),
            m("2024-04-10", "B", "A", 1, 2, true),
        ];
        let cfg = HistAbilityConfig {
            home_advantage: HomeAdvantage::PerTeam,
            ..Default::default()
        };
        let fit = fit_hist_abilities(&matches, date("2024-06-01"), &cfg).unwrap();
        match &fit.home_effects {
            HomeEffects::PerTeam(h) => assert_eq!(h.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        let sum: f64 = fit.abilities.values().sum();
        assert!(sum.abs() < 1e-10);
    }
}
