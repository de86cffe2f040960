//! Plus-minus player ratings.
//!
//! Matches are cut into segments with an unchanged set of players on the
//! pitch. Each segment's goal difference per 90 minutes (home minus away)
//! is regressed on signed on-pitch indicators, plus home, red-card,
//! competition-strength and age covariates, by weighted ridge regression.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{csv_reader, display_name, parse_bool};
use crate::error::{Error, Result};
use crate::hist_ability::time_weight;

pub const FULL_SIDE: usize = 11;
pub const DEFAULT_MATCH_LENGTH: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Home,
    Away,
}

/// Metadata and starting line-ups of one match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSheet {
    pub match_id: String,
    pub date: NaiveDate,
    pub competition: String,
    pub neutral: bool,
    pub home_team: String,
    pub away_team: String,
    pub home_start: Vec<String>,
    pub away_start: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Goal,
    RedCard,
    SubOff,
    SubOn,
    End,
}

impl std::str::FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "goal" => Ok(EventType::Goal),
            "red_card" => Ok(EventType::RedCard),
            "sub_off" => Ok(EventType::SubOff),
            "sub_on" => Ok(EventType::SubOn),
            "end" => Ok(EventType::End),
            other => Err(format!("unknown event type '{other}'")),
        }
    }
}

impl EventType {
    /// Processing order within one minute: cards, substitutions, goals.
    fn rank(self) -> u8 {
        match self {
            EventType::RedCard => 0,
            EventType::SubOff => 1,
            EventType::SubOn => 2,
            EventType::Goal => 3,
            EventType::End => 4,
        }
    }
}

/// `team` is the side the event counts for: the scoring side for goals
/// (own goals included), the player's side otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEvent {
    pub match_id: String,
    pub minute: f64,
    pub event_type: EventType,
    pub player: String,
    pub team: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub match_id: String,
    pub start_min: f64,
    pub end_min: f64,
    pub home_lineup: Vec<String>,
    pub away_lineup: Vec<String>,
    pub red_home: u32,
    pub red_away: u32,
    pub goals_home: u32,
    pub goals_away: u32,
    pub competition: String,
    pub match_date: NaiveDate,
    pub neutral: bool,
    /// Home minus away score when the segment starts.
    pub pre_segment_score_diff: i32,
}

impl SegmentRecord {
    pub fn duration(&self) -> f64 {
        self.end_min - self.start_min
    }

    /// The same segment seen from the other side.
    pub fn swapped(&self) -> SegmentRecord {
        SegmentRecord {
            home_lineup: self.away_lineup.clone(),
            away_lineup: self.home_lineup.clone(),
            red_home: self.red_away,
            red_away: self.red_home,
            goals_home: self.goals_away,
            goals_away: self.goals_home,
            pre_segment_score_diff: -self.pre_segment_score_diff,
            ..self.clone()
        }
    }
}

fn side_of(sheet: &MatchSheet, team: &str) -> std::result::Result<Side, String> {
    if team == sheet.home_team {
        Ok(Side::Home)
    } else if team == sheet.away_team {
        Ok(Side::Away)
    } else {
        Err(format!("team '{team}' does not play in match {}", sheet.match_id))
    }
}

/// Cuts one match into segments at every red card and substitution.
///
/// Events at the same minute are applied as cards, then substitutions,
/// then goals, so a goal scored in the minute of a change counts for the
/// new segment. The match ends at the `end` event, or at 90 minutes (or
/// the last event, if later) without one.
pub fn build_segments(sheet: &MatchSheet, events: &[MatchEvent]) -> Result<Vec<SegmentRecord>> {
    let fail = |m: String| Error::InvalidInput(format!("match {}: {m}", sheet.match_id));
    let mut on: [BTreeSet<String>; 2] = [
        sheet.home_start.iter().cloned().collect(),
        sheet.away_start.iter().cloned().collect(),
    ];
    for (s, lineup) in [&sheet.home_start, &sheet.away_start].iter().enumerate() {
        if on[s].len() != lineup.len() {
            return Err(fail("duplicate player in line-up".into()));
        }
        if lineup.len() > FULL_SIDE {
            return Err(fail(format!("{} starters on one side", lineup.len())));
        }
    }
    let mut evs: Vec<&MatchEvent> = events.iter().filter(|e| e.match_id == sheet.match_id).collect();
    if let Some(e) = evs.iter().find(|e| !(e.minute >= 0.0 && e.minute.is_finite())) {
        return Err(fail(format!("invalid minute {}", e.minute)));
    }
    evs.sort_by(|a, b| a.minute.total_cmp(&b.minute).then(a.event_type.rank().cmp(&b.event_type.rank())));
    let end = evs
        .iter()
        .find(|e| e.event_type == EventType::End)
        .map(|e| e.minute)
        .unwrap_or_else(|| evs.iter().map(|e| e.minute).fold(DEFAULT_MATCH_LENGTH, f64::max));
    if let Some(e) = evs.iter().find(|e| e.minute > end) {
        return Err(fail(format!("event at minute {} after the final whistle at {end}", e.minute)));
    }

    let mut segments = Vec::new();
    let mut start = 0.0;
    let mut reds = [0u32; 2];
    let mut score = [0u32; 2];
    let mut seg_goals = [0u32; 2];
    let mut close = |at: f64, on: &[BTreeSet<String>; 2], reds: [u32; 2], seg_goals: &mut [u32; 2], score: [u32; 2], start: &mut f64| {
        if at > *start {
            segments.push(SegmentRecord {
                match_id: sheet.match_id.clone(),
                start_min: *start,
                end_min: at,
                home_lineup: on[0].iter().cloned().collect(),
                away_lineup: on[1].iter().cloned().collect(),
                red_home: reds[0],
                red_away: reds[1],
                goals_home: seg_goals[0],
                goals_away: seg_goals[1],
                competition: sheet.competition.clone(),
                match_date: sheet.date,
                neutral: sheet.neutral,
                pre_segment_score_diff: (score[0] - seg_goals[0]) as i32 - (score[1] - seg_goals[1]) as i32,
            });
            *seg_goals = [0, 0];
            *start = at;
        }
    };

    for e in evs {
        let s = side_of(sheet, &e.team).map_err(&fail)? as usize;
        match e.event_type {
            EventType::RedCard | EventType::SubOff | EventType::SubOn => {
                close(e.minute, &on, reds, &mut seg_goals, score, &mut start);
                match e.event_type {
                    EventType::RedCard => {
                        if !on[s].remove(&e.player) {
                            return Err(fail(format!("red card for {} who is not on the pitch", e.player)));
                        }
                        reds[s] += 1;
                    }
                    EventType::SubOff => {
                        if !on[s].remove(&e.player) {
                            return Err(fail(format!("substitution of {} who is not on the pitch", e.player)));
                        }
                    }
                    _ => {
                        if on[1 - s].contains(&e.player) || !on[s].insert(e.player.clone()) {
                            return Err(fail(format!("{} comes on but is already playing", e.player)));
                        }
                        if on[s].len() > FULL_SIDE {
                            return Err(fail(format!("more than {FULL_SIDE} players after {} comes on", e.player)));
                        }
                    }
                }
            }
            EventType::Goal => {
                score[s] += 1;
                seg_goals[s] += 1;
            }
            EventType::End => {}
        }
    }
    close(end, &on, reds, &mut seg_goals, score, &mut start);
    if seg_goals != [0, 0] {
        return Err(fail("goals after the last segment".into()));
    }
    Ok(segments)
}

/// Segments of every match; events are grouped by match id.
pub fn build_all_segments(sheets: &[MatchSheet], events: &[MatchEvent]) -> Result<Vec<SegmentRecord>> {
    let mut by_match: HashMap<&str, Vec<MatchEvent>> = HashMap::new();
    for e in events {
        by_match.entry(e.match_id.as_str()).or_default().push(e.clone());
    }
    let known: BTreeSet<&str> = sheets.iter().map(|s| s.match_id.as_str()).collect();
    if let Some(id) = by_match.keys().find(|id| !known.contains(**id)) {
        return Err(Error::InvalidInput(format!("events for unknown match {id}")));
    }
    let parts: Vec<Vec<SegmentRecord>> = sheets
        .par_iter()
        .map(|s| build_segments(s, by_match.get(s.match_id.as_str()).map_or(&[][..], |v| v)))
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerInfo {
    pub player: String,
    pub birth_date: NaiveDate,
    pub club: String,
}

impl PlayerInfo {
    pub fn age_at(&self, date: NaiveDate) -> f64 {
        (date - self.birth_date).num_days() as f64 / 365.25
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmConfig {
    pub ridge_strength: f64,
    /// Ridge on the non-player covariates; keeps them identified.
    pub covariate_ridge: f64,
    pub half_period_days: f64,
    /// Recency is measured back from here; the latest match date if unset.
    pub reference_date: Option<NaiveDate>,
    /// Segments starting with at least this score margin are down-weighted.
    pub state_margin: i32,
    pub state_factor: f64,
    pub home_advantage: bool,
    pub red_card_levels: usize,
    pub competition_strength: bool,
    pub age: bool,
    pub teammate_prior: bool,
    pub teammate_min_shared: usize,
    pub tolerance: f64,
}

impl Default for PmConfig {
    fn default() -> Self {
        PmConfig {
            ridge_strength: 10.0,
            covariate_ridge: 1e-6,
            half_period_days: crate::hist_ability::DEFAULT_HALF_PERIOD_DAYS,
            reference_date: None,
            state_margin: 2,
            state_factor: 0.5,
            home_advantage: true,
            red_card_levels: 3,
            competition_strength: true,
            age: true,
            teammate_prior: true,
            teammate_min_shared: 10,
            tolerance: 1e-12,
        }
    }
}

impl PmConfig {
    /// Players only: no covariates, no weights other than duration, no
    /// teammate prior.
    pub fn players_only(ridge_strength: f64) -> Self {
        PmConfig {
            ridge_strength,
            home_advantage: false,
            red_card_levels: 0,
            competition_strength: false,
            age: false,
            teammate_prior: false,
            state_factor: 1.0,
            half_period_days: f64::INFINITY,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmModel {
    pub player_ratings: BTreeMap<String, f64>,
    pub home_advantage: BTreeMap<String, f64>,
    /// Strength of each player's main competition relative to the first.
    pub competition_adjust: BTreeMap<String, f64>,
    /// One coefficient per numerical-advantage level, 1 up to the configured maximum.
    pub red_card_coeffs: Vec<f64>,
    /// Linear and quadratic terms in `(age - 27) / 10`.
    pub age_coeffs: [f64; 2],
    pub ridge_strength: f64,
    pub config: PmConfig,
    pub cg_iterations: usize,
}

impl PmModel {
    pub fn rating(&self, player: &str) -> Option<f64> {
        self.player_ratings.get(player).copied()
    }

    pub fn rating_norm(&self) -> f64 {
        self.player_ratings.values().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Column layout of the design.
struct Layout {
    players: Vec<String>,
    player_idx: HashMap<String, usize>,
    home_comps: Vec<String>,
    red_levels: usize,
    /// Competitions with a strength column (all but the reference).
    strength_comps: Vec<String>,
    age: bool,
}

impl Layout {
    fn n_players(&self) -> usize {
        self.players.len()
    }
    fn home_col(&self, i: usize) -> usize {
        self.n_players() + i
    }
    fn red_col(&self, level: usize) -> usize {
        self.n_players() + self.home_comps.len() + level - 1
    }
    fn strength_col(&self, i: usize) -> usize {
        self.n_players() + self.home_comps.len() + self.red_levels + i
    }
    fn age_col(&self, k: usize) -> usize {
        self.n_players() + self.home_comps.len() + self.red_levels + self.strength_comps.len() + k
    }
    fn dim(&self) -> usize {
        self.age_col(0) + if self.age { 2 } else { 0 }
    }
}

/// Sparse weighted least-squares problem.
struct Problem {
    rows: Vec<Vec<(usize, f64)>>,
    y: Vec<f64>,
    w: Vec<f64>,
    /// Diagonal ridge per column.
    ridge: Vec<f64>,
    /// Ridge target per column.
    target: Vec<f64>,
}

impl Problem {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, (r, t)) in out.iter_mut().zip(self.ridge.iter().zip(v)) {
            *o = r * t;
        }
        for (row, w) in self.rows.iter().zip(&self.w) {
            let dot: f64 = row.iter().map(|(c, x)| x * v[*c]).sum();
            for (c, x) in row {
                out[*c] += w * x * dot;
            }
        }
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.ridge.iter().zip(&self.target).map(|(r, t)| r * t).collect();
        for ((row, w), y) in self.rows.iter().zip(&self.w).zip(&self.y) {
            for (c, x) in row {
                b[*c] += w * x * y;
            }
        }
        b
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = self.ridge.clone();
        for (row, w) in self.rows.iter().zip(&self.w) {
            for (c, x) in row {
                d[*c] += w * x * x;
            }
        }
        d
    }

    /// Jacobi-preconditioned conjugate gradients on the normal equations.
    fn solve(&self, tol: f64) -> Result<(Vec<f64>, usize)> {
        let n = self.ridge.len();
        let diag = self.diagonal();
        if let Some(c) = diag.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::Numerical(format!("singular system: column {c} carries no information")));
        }
        let b = self.rhs();
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok((x, 0));
        }
        let mut r = b;
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        let max_iter = 20 * n + 100;
        for it in 0..max_iter {
            self.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::Numerical("singular system: normal matrix is not positive definite".into()));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r_norm <= tol * b_norm {
                return Ok((x, it + 1));
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::Numerical(format!(
            "conjugate gradients did not reach tolerance {tol:e} in {max_iter} iterations; system is close to singular"
        )))
    }
}

/// Numerical advantage of the home side.
fn man_advantage(s: &SegmentRecord) -> i64 {
    s.home_lineup.len() as i64 - s.away_lineup.len() as i64
}

/// Each player's main competition: the one with the most minutes played.
fn main_competitions(segments: &[SegmentRecord]) -> BTreeMap<String, String> {
    let mut minutes: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for s in segments {
        for p in s.home_lineup.iter().chain(&s.away_lineup) {
            *minutes.entry(p).or_default().entry(&s.competition).or_default() += s.duration();
        }
    }
    minutes
        .into_iter()
        .map(|(p, m)| {
            let best = m
                .iter()
                .fold(None::<(&str, f64)>, |b, (c, v)| match b {
                    Some((_, bv)) if bv >= *v => b,
                    _ => Some((c, *v)),
                })
                .expect("at least one competition")
                .0;
            (p.to_string(), best.to_string())
        })
        .collect()
}

pub fn segment_weight(s: &SegmentRecord, reference: NaiveDate, config: &PmConfig) -> Result<f64> {
    let days = (reference - s.match_date).num_days() as f64;
    let recency = if config.half_period_days.is_finite() {
        time_weight(days, config.half_period_days)?
    } else {
        1.0
    };
    let state = if s.pre_segment_score_diff.abs() >= config.state_margin {
        config.state_factor
    } else {
        1.0
    };
    Ok(recency * (s.duration() / DEFAULT_MATCH_LENGTH) * state)
}

pub fn fit_pm_ratings(
    segments: &[SegmentRecord],
    players: &BTreeMap<String, PlayerInfo>,
    config: &PmConfig,
) -> Result<PmModel> {
    if segments.is_empty() {
        return Err(Error::InvalidInput("no segments".into()));
    }
    if !(config.ridge_strength > 0.0 && config.ridge_strength.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "ridge strength must be positive, got {}; the player design is rank deficient without it",
            config.ridge_strength
        )));
    }
    if config.covariate_ridge < 0.0 {
        return Err(Error::InvalidInput("covariate ridge must be non-negative".into()));
    }
    for s in segments {
        if !(s.end_min > s.start_min) {
            return Err(Error::InvalidInput(format!("match {}: empty segment", s.match_id)));
        }
        if s.home_lineup.is_empty() || s.away_lineup.is_empty() {
            return Err(Error::InvalidInput(format!("match {}: side without players", s.match_id)));
        }
    }
    let reference = config
        .reference_date
        .unwrap_or_else(|| segments.iter().map(|s| s.match_date).max().expect("non-empty"));

    let mut player_set = BTreeSet::new();
    for s in segments {
        for p in s.home_lineup.iter().chain(&s.away_lineup) {
            player_set.insert(p.clone());
        }
    }
    if config.age {
        if let Some(p) = player_set.iter().find(|p| !players.contains_key(*p)) {
            return Err(Error::InvalidInput(format!("no roster entry for player {p}")));
        }
    }
    let main_comp = main_competitions(segments);
    let home_comps: Vec<String> = if config.home_advantage {
        segments
            .iter()
            .filter(|s| !s.neutral)
            .map(|s| s.competition.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        Vec::new()
    };
    let strength_comps: Vec<String> = if config.competition_strength {
        let all: BTreeSet<&String> = main_comp.values().collect();
        all.into_iter().skip(1).cloned().collect()
    } else {
        Vec::new()
    };
    let players_vec: Vec<String> = player_set.into_iter().collect();
    let layout = Layout {
        player_idx: players_vec.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect(),
        players: players_vec,
        home_comps,
        red_levels: config.red_card_levels,
        strength_comps,
        age: config.age,
    };
    let np = layout.n_players();

    let mut rows = Vec::with_capacity(segments.len());
    let mut y = Vec::with_capacity(segments.len());
    let mut w = Vec::with_capacity(segments.len());
    for s in segments {
        let sh = FULL_SIDE as f64 / s.home_lineup.len() as f64;
        let sa = FULL_SIDE as f64 / s.away_lineup.len() as f64;
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(30);
        for p in &s.home_lineup {
            row.push((layout.player_idx[p], sh));
        }
        for p in &s.away_lineup {
            row.push((layout.player_idx[p], -sa));
        }
        if !s.neutral {
            if let Some(i) = layout.home_comps.iter().position(|c| *c == s.competition) {
                row.push((layout.home_col(i), 1.0));
            }
        }
        let adv = man_advantage(s);
        if adv != 0 && (adv.unsigned_abs() as usize) <= layout.red_levels {
            row.push((layout.red_col(adv.unsigned_abs() as usize), adv.signum() as f64));
        }
        if !layout.strength_comps.is_empty() {
            let mut share = vec![0.0; layout.strength_comps.len()];
            for (lineup, sign, scale) in [(&s.home_lineup, 1.0, sh), (&s.away_lineup, -1.0, sa)] {
                for p in lineup {
                    if let Some(i) = layout.strength_comps.iter().position(|c| *c == main_comp[p]) {
                        share[i] += sign * scale;
                    }
                }
            }
            for (i, v) in share.into_iter().enumerate() {
                if v != 0.0 {
                    row.push((layout.strength_col(i), v));
                }
            }
        }
        if layout.age {
            let mut a = [0.0; 2];
            for (lineup, sign, scale) in [(&s.home_lineup, 1.0, sh), (&s.away_lineup, -1.0, sa)] {
                for p in lineup {
                    let t = (players[p].age_at(s.match_date) - 27.0) / 10.0;
                    a[0] += sign * scale * t;
                    a[1] += sign * scale * t * t;
                }
            }
            row.push((layout.age_col(0), a[0]));
            row.push((layout.age_col(1), a[1]));
        }
        rows.push(row);
        y.push((s.goals_home as f64 - s.goals_away as f64) * DEFAULT_MATCH_LENGTH / s.duration());
        w.push(segment_weight(s, reference, config)?);
    }

    let dim = layout.dim();
    let mut ridge = vec![config.covariate_ridge; dim];
    ridge[..np].fill(config.ridge_strength);
    let mut problem = Problem {
        rows,
        y,
        w,
        ridge,
        target: vec![0.0; dim],
    };
    let (mut theta, mut iters) = problem.solve(config.tolerance)?;

    if config.teammate_prior {
        problem.target[..np].copy_from_slice(&teammate_targets(segments, &layout, &theta, config.teammate_min_shared));
        let (t2, i2) = problem.solve(config.tolerance)?;
        theta = t2;
        iters += i2;
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite plus-minus coefficient".into()));
    }

    Ok(PmModel {
        player_ratings: layout.players.iter().cloned().zip(theta[..np].iter().copied()).collect(),
        home_advantage: layout
            .home_comps
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), theta[layout.home_col(i)]))
            .collect(),
        competition_adjust: layout
            .strength_comps
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), theta[layout.strength_col(i)]))
            .collect(),
        red_card_coeffs: (1..=layout.red_levels).map(|l| theta[layout.red_col(l)]).collect(),
        age_coeffs: if layout.age {
            [theta[layout.age_col(0)], theta[layout.age_col(1)]]
        } else {
            [0.0; 2]
        },
        ridge_strength: config.ridge_strength,
        config: config.clone(),
        cg_iterations: iters,
    })
}

/// Per player, the mean first-pass rating of teammates who shared at least
/// `min_shared` segments with them, weighted by the number shared; 0 when
/// there are none.
fn teammate_targets(segments: &[SegmentRecord], layout: &Layout, theta: &[f64], min_shared: usize) -> Vec<f64> {
    let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
    for s in segments {
        for lineup in [&s.home_lineup, &s.away_lineup] {
            let idx: Vec<usize> = lineup.iter().map(|p| layout.player_idx[p]).collect();
            for &a in &idx {
                for &b in &idx {
                    if a != b {
                        *shared.entry((a, b)).or_default() += 1;
                    }
                }
            }
        }
    }
    let mut num = vec![0.0; layout.n_players()];
    let mut den = vec![0.0; layout.n_players()];
    for ((a, b), n) in shared {
        if n >= min_shared {
            num[a] += n as f64 * theta[b];
            den[a] += n as f64;
        }
    }
    num.iter().zip(&den).map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamPmSummary {
    pub team: String,
    pub ave_pm: f64,
}

/// Mean rating of a squad.
pub fn team_ave_pm(model: &PmModel, team: &str, squad: &[String]) -> Result<TeamPmSummary> {
    if squad.is_empty() {
        return Err(Error::InvalidInput(format!("empty squad for {team}")));
    }
    let mut sum = 0.0;
    for p in squad {
        sum += model
            .rating(p)
            .ok_or_else(|| Error::InvalidInput(format!("player {p} of {team} has no rating")))?;
    }
    Ok(TeamPmSummary {
        team: team.to_string(),
        ave_pm: sum / squad.len() as f64,
    })
}

// ---------------------------------------------------------------------------
// file formats

pub const LINEUPS_HEADER: [&str; 7] = ["match_id", "date", "competition", "neutral", "side", "team", "player"];
pub const EVENTS_HEADER: [&str; 5] = ["match_id", "minute", "event_type", "player", "team"];
pub const PLAYERS_HEADER: [&str; 3] = ["player", "birth_date", "club"];
pub const SQUADS_HEADER: [&str; 2] = ["team", "player"];

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

pub fn load_lineups(path: &Path) -> Result<Vec<MatchSheet>> {
    read_lineups(open(path)?, &display_name(path))
}

/// One row per starter; match metadata must agree across a match's rows.
pub fn read_lineups<R: Read>(input: R, name: &str) -> Result<Vec<MatchSheet>> {
    let mut rdr = csv_reader(input, name, &LINEUPS_HEADER)?;
    let mut sheets: Vec<MatchSheet> = Vec::new();
    let mut pos: HashMap<String, usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(name, row, e.to_string()))?;
        let err = |m: String| Error::row(name, row, m);
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|_| err(format!("malformed date '{}'", &rec[1])))?;
        let neutral = parse_bool(&rec[3]).map_err(err)?;
        let side = match &rec[4] {
            "home" => Side::Home,
            "away" => Side::Away,
            other => return Err(err(format!("side must be home or away, got '{other}'"))),
        };
        let id = rec[0].to_string();
        let idx = *pos.entry(id.clone()).or_insert_with(|| {
            sheets.push(MatchSheet {
                match_id: id.clone(),
                date,
                competition: rec[2].to_string(),
                neutral,
                home_team: String::new(),
                away_team: String::new(),
                home_start: Vec::new(),
                away_start: Vec::new(),
            });
            sheets.len() - 1
        });
        let sheet = &mut sheets[idx];
        if sheet.date != date || sheet.competition != rec[2] || sheet.neutral != neutral {
            return Err(err(format!("match {id}: metadata differs from earlier rows")));
        }
        let (team, lineup) = match side {
            Side::Home => (&mut sheet.home_team, &mut sheet.home_start),
            Side::Away => (&mut sheet.away_team, &mut sheet.away_start),
        };
        if team.is_empty() {
            *team = rec[5].to_string();
        } else if *team != rec[5] {
            return Err(err(format!("match {id}: two different {side:?} teams")));
        }
        lineup.push(rec[6].to_string());
    }
    if let Some(s) = sheets.iter().find(|s| s.home_start.is_empty() || s.away_start.is_empty()) {
        return Err(Error::Schema {
            file: name.to_string(),
            message: format!("match {} lacks a line-up for one side", s.match_id),
        });
    }
    Ok(sheets)
}

pub fn load_events(path: &Path) -> Result<Vec<MatchEvent>> {
    read_events(open(path)?, &display_name(path))
}

pub fn read_events<R: Read>(input: R, name: &str) -> Result<Vec<MatchEvent>> {
    let mut rdr = csv_reader(input, name, &EVENTS_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(name, row, e.to_string()))?;
        let minute: f64 = rec[1]
            .parse()
            .map_err(|_| Error::row(name, row, format!("minute: cannot parse '{}'", &rec[1])))?;
        out.push(MatchEvent {
            match_id: rec[0].to_string(),
            minute,
            event_type: rec[2].parse().map_err(|m| Error::row(name, row, m))?,
            player: rec[3].to_string(),
            team: rec[4].to_string(),
        });
    }
    Ok(out)
}

pub fn load_players(path: &Path) -> Result<BTreeMap<String, PlayerInfo>> {
    read_players(open(path)?, &display_name(path))
}

pub fn read_players<R: Read>(input: R, name: &str) -> Result<BTreeMap<String, PlayerInfo>> {
    let mut rdr = csv_reader(input, name, &PLAYERS_HEADER)?;
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(name, row, e.to_string()))?;
        let birth_date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|_| Error::row(name, row, format!("malformed birth date '{}'", &rec[1])))?;
        let info = PlayerInfo {
            player: rec[0].to_string(),
            birth_date,
            club: rec[2].to_string(),
        };
        if out.insert(info.player.clone(), info).is_some() {
            return Err(Error::row(name, row, format!("duplicate player {}", &rec[0])));
        }
    }
    Ok(out)
}

/// Squads keyed by team, players in file order.
pub fn load_squads(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    read_squads(open(path)?, &display_name(path))
}

pub fn read_squads<R: Read>(input: R, name: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut rdr = csv_reader(input, name, &SQUADS_HEADER)?;
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::row(name, i + 1, e.to_string()))?;
        out.entry(rec[0].to_string()).or_default().push(rec[1].to_string());
    }
    Ok(out)
}

fn writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(header).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(wtr)
}

fn put<W: Write>(wtr: &mut csv::Writer<W>, rec: &[&str]) -> Result<()> {
    wtr.write_record(rec).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn finish<W: Write>(mut wtr: csv::Writer<W>) -> Result<()> {
    wtr.flush().map_err(|e| Error::io("<output>", e))
}

pub fn write_lineups<W: Write>(out: W, sheets: &[MatchSheet]) -> Result<()> {
    let mut wtr = writer(out, &LINEUPS_HEADER)?;
    for s in sheets {
        let date = s.date.to_string();
        let neutral = if s.neutral { "yes" } else { "no" };
        for (side, team, lineup) in [("home", &s.home_team, &s.home_start), ("away", &s.away_team, &s.away_start)] {
            for p in lineup {
                put(&mut wtr, &[&s.match_id, &date, &s.competition, neutral, side, team, p])?;
            }
        }
    }
    finish(wtr)
}

pub fn write_events<W: Write>(out: W, events: &[MatchEvent]) -> Result<()> {
    let mut wtr = writer(out, &EVENTS_HEADER)?;
    for e in events {
        let kind = match e.event_type {
            EventType::Goal => "goal",
            EventType::RedCard => "red_card",
            EventType::SubOff => "sub_off",
            EventType::SubOn => "sub_on",
            EventType::End => "end",
        };
        put(&mut wtr, &[&e.match_id, &e.minute.to_string(), kind, &e.player, &e.team])?;
    }
    finish(wtr)
}

pub fn write_players<W: Write>(out: W, players: &BTreeMap<String, PlayerInfo>) -> Result<()> {
    let mut wtr = writer(out, &PLAYERS_HEADER)?;
    for p in players.values() {
        put(&mut wtr, &[&p.player, &p.birth_date.to_string(), &p.club])?;
    }
    finish(wtr)
}

pub fn write_squads<W: Write>(out: W, squads: &BTreeMap<String, Vec<String>>) -> Result<()> {
    let mut wtr = writer(out, &SQUADS_HEADER)?;
    for (team, players) in squads {
        for p in players {
            put(&mut wtr, &[team, p])?;
        }
    }
    finish(wtr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sheet() -> MatchSheet {
        MatchSheet {
            match_id: "m1".into(),
            date: NaiveDate::from_ymd_opt(2021, 6, 2).unwrap(),
            competition: "friendly".into(),
            neutral: false,
            home_team: "ROU".into(),
            away_team: "GEO".into(),
            home_start: (0..11).map(|i| format!("h{i}")).collect(),
            away_start: (0..11).map(|i| format!("a{i}")).collect(),
        }
    }

    fn ev(minute: f64, t: EventType, player: &str, team: &str) -> MatchEvent {
        MatchEvent {
            match_id: "m1".into(),
            minute,
            event_type: t,
            player: player.into(),
            team: team.into(),
        }
    }

    #[test]
    fn no_events_one_segment() {
        let s = build_segments(&sheet(), &[]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].start_min, s[0].end_min), (0.0, 90.0));
    }

    #[test]
    fn substitution_splits() {
        let evs = [
            ev(36.0, EventType::SubOff, "h3", "ROU"),
            ev(36.0, EventType::SubOn, "h11", "ROU"),
            ev(90.0, EventType::End, "", "ROU"),
        ];
        let s = build_segments(&sheet(), &evs).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].start_min, s[0].end_min), (0.0, 36.0));
        assert_eq!((s[1].start_min, s[1].end_min), (36.0, 90.0));
        assert!(s[1].home_lineup.contains(&"h11".to_string()));
        assert!(!s[1].home_lineup.contains(&"h3".to_string()));
    }

    #[test]
    fn goal_in_change_minute_joins_new_segment() {
        let evs = [
            ev(50.0, EventType::Goal, "a1", "GEO"),
            ev(50.0, EventType::RedCard, "h2", "ROU"),
            ev(70.0, EventType::Goal, "h1", "ROU"),
            ev(93.0, EventType::End, "", "ROU"),
        ];
        let s = build_segments(&sheet(), &evs).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].goals_home, s[0].goals_away), (0, 0));
        assert_eq!((s[1].goals_home, s[1].goals_away), (1, 1));
        assert_eq!(s[1].red_home, 1);
        assert_eq!(s[1].home_lineup.len(), 10);
        assert_eq!(s[1].end_min, 93.0);
    }

    #[test]
    fn invalid_substitution() {
        let evs = [ev(10.0, EventType::SubOff, "nobody", "ROU")];
        assert!(build_segments(&sheet(), &evs).is_err());
        let evs = [ev(10.0, EventType::SubOn, "a0", "ROU")];
        assert!(build_segments(&sheet(), &evs).is_err());
        let evs = [ev(10.0, EventType::Goal, "x", "ITA")];
        assert!(build_segments(&sheet(), &evs).is_err());
    }

    #[test]
    fn lineup_file_roundtrip() {
        let text = "match_id,date,competition,neutral,side,team,player\n\
                    m1,2021-06-02,friendly,no,home,ROU,p1\n\
                    m1,2021-06-02,friendly,no,away,GEO,p2\n";
        let s = read_lineups(text.as_bytes(), "lineups").unwrap();
        assert_eq!(s[0].home_team, "ROU");
        assert_eq!(s[0].away_start, vec!["p2".to_string()]);
        let bad = "match_id,date,competition,neutral,side,team,player\nm1,2021-06-02,friendly,no,home,ROU,p1\n";
        assert!(read_lineups(bad.as_bytes(), "lineups").is_err());
    }

    #[test]
    fn ave_pm_examples() {
        let mut m = PmModel {
            player_ratings: BTreeMap::new(),
            home_advantage: BTreeMap::new(),
            competition_adjust: BTreeMap::new(),
            red_card_coeffs: vec![],
            age_coeffs: [0.0; 2],
            ridge_strength: 1.0,
            config: PmConfig::default(),
            cg_iterations: 0,
        };
        m.player_ratings.insert("a".into(), 0.17);
        m.player_ratings.insert("b".into(), 0.1);
        m.player_ratings.insert("c".into(), 0.3);
        assert_eq!(team_ave_pm(&m, "T", &["a".into()]).unwrap().ave_pm, 0.17);
        assert!((team_ave_pm(&m, "T", &["b".into(), "c".into()]).unwrap().ave_pm - 0.2).abs() < 1e-15);
        assert!(team_ave_pm(&m, "T", &["zz".into()]).is_err());
    }

    #[test]
    fn zero_ridge_rejected() {
        let s = build_segments(&sheet(), &[]).unwrap();
        assert!(fit_pm_ratings(&s, &BTreeMap::new(), &PmConfig::players_only(0.0)).is_err());
    }

    fn toy_segments() -> Vec<SegmentRecord> {
        let mut out = Vec::new();
        let base = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        for m in 0..30usize {
            let home: Vec<String> = (0..3).map(|k| format!("p{}", (m + k) % 7)).collect();
            let away: Vec<String> = (0..3).map(|k| format!("p{}", 7 + (m * 2 + k) % 6)).collect();
            for seg in 0..2 {
                let g = (m * 7 + seg * 3) % 5;
                out.push(SegmentRecord {
                    match_id: format!("m{m}"),
                    start_min: seg as f64 * 40.0,
                    end_min: if seg == 0 { 40.0 } else { 90.0 },
                    home_lineup: home.clone(),
                    away_lineup: away.clone(),
                    red_home: 0,
                    red_away: 0,
                    goals_home: (g % 3) as u32,
                    goals_away: (g / 3) as u32,
                    competition: if m % 2 == 0 { "A" } else { "B" }.into(),
                    match_date: base + chrono::Duration::days(m as i64 * 30),
                    neutral: m % 3 == 0,
                    pre_segment_score_diff: seg as i32 * 2,
                });
            }
        }
        out
    }

    #[test]
    fn matches_dense_normal_equations() {
        use nalgebra::{DMatrix, DVector};
        let segs = toy_segments();
        let config = PmConfig {
            ridge_strength: 2.0,
            competition_strength: false,
            age: false,
            teammate_prior: false,
            red_card_levels: 0,
            ..Default::default()
        };
        let model = fit_pm_ratings(&segs, &BTreeMap::new(), &config).unwrap();
        let players: Vec<String> = model.player_ratings.keys().cloned().collect();
        let comps = ["A", "B"];
        let p = players.len() + comps.len();
        let reference = segs.iter().map(|s| s.match_date).max().unwrap();
        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut b = DVector::<f64>::zeros(p);
        for s in &segs {
            let mut x = DVector::<f64>::zeros(p);
            for q in &s.home_lineup {
                x[players.iter().position(|n| n == q).unwrap()] += 11.0 / 3.0;
            }
            for q in &s.away_lineup {
                x[players.iter().position(|n| n == q).unwrap()] -= 11.0 / 3.0;
            }
            if !s.neutral {
                x[players.len() + comps.iter().position(|c| *c == s.competition).unwrap()] = 1.0;
            }
            let days = (reference - s.match_date).num_days() as f64;
            let mut w = 0.5f64.powf(days / 1095.75) * s.duration() / 90.0;
            if s.pre_segment_score_diff.abs() >= 2 {
                w *= 0.5;
            }
            let y = (s.goals_home as f64 - s.goals_away as f64) * 90.0 / s.duration();
            a += &x * x.transpose() * w;
            b += &x * (w * y);
        }
        for i in 0..p {
            a[(i, i)] += if i < players.len() { 2.0 } else { 1e-6 };
        }
        let theta = a.lu().solve(&b).unwrap();
        for (i, q) in players.iter().enumerate() {
            assert!((model.player_ratings[q] - theta[i]).abs() < 1e-8);
        }
        assert!((model.home_advantage["A"] - theta[players.len()]).abs() < 1e-8);
    }

    #[test]
    fn swapped_sides_negate_ratings() {
        let segs = toy_segments();
        let config = PmConfig::players_only(1.0);
        let a = fit_pm_ratings(&segs, &BTreeMap::new(), &config).unwrap();
        let swapped: Vec<SegmentRecord> = segs
            .iter()
            .map(|s| SegmentRecord {
                home_lineup: s.away_lineup.clone(),
                away_lineup: s.home_lineup.clone(),
                ..s.clone()
            })
            .collect();
        let b = fit_pm_ratings(&swapped, &BTreeMap::new(), &config).unwrap();
        for (p, r) in &a.player_ratings {
            assert!((r + b.player_ratings[p]).abs() < 1e-9);
        }
    }

    #[test]
    fn ridge_shrinks_ratings() {
        let segs = toy_segments();
        let mut last = f64::INFINITY;
        for lambda in [0.1, 1.0, 10.0, 100.0, 1e8] {
            let m = fit_pm_ratings(&segs, &BTreeMap::new(), &PmConfig::players_only(lambda)).unwrap();
            assert!(m.rating_norm() <= last + 1e-12);
            last = m.rating_norm();
        }
        assert!(last < 1e-5);
    }
}
