//! Monte Carlo simulation of the 24-team tournament format.
//!
//! Group matches are sampled from independent Poisson scores and ranked with
//! the head-to-head cascade; the four best third-placed teams are placed
//! through the configured lookup table; knockout ties go to extra time at a
//! third of the regular intensities and then to a fair coin.
//!
//! Replication `k` draws from ChaCha stream `k` of the run seed, so results
//! do not depend on how replications are spread over threads.

use std::cmp::Ordering;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{feature_diff, FeatureVec, TeamId};
use crate::error::{Error, Result};
use crate::match_prob::{outcome_probs, sample_score, MatchIntensities};
use crate::predictors::GoalModel;
use crate::tournament::{TournamentConfig, GROUP_SIZE, N_THIRDS_QUALIFYING};

pub const DEFAULT_REPLICATIONS: u64 = 100_000;
/// Extra time lasts a third of regular time.
pub const EXTRA_TIME_FACTOR: f64 = 1.0 / 3.0;

/// Replications per parallel work item; fixed so float sums are reproducible.
const CHUNK: u64 = 1_000;

pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Expected goals for every ordered pair of teams.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntensityTable {
    n: usize,
    lambda: Vec<f64>,
}

impl IntensityTable {
    /// `f(i, j)` is the expected number of goals of team `i` against `j`.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut lambda = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    lambda[i * n + j] = f(i, j);
                }
            }
        }
        IntensityTable { n, lambda }
    }

    pub fn constant(n: usize, lambda: f64) -> Self {
        Self::from_fn(n, |_, _| lambda)
    }

    /// `exp(intercept + r_i - r_j)`, the ability model without home effects.
    pub fn from_abilities(abilities: &[f64], intercept: f64) -> Self {
        Self::from_fn(abilities.len(), |i, j| (intercept + abilities[i] - abilities[j]).exp())
    }

    /// Goal-model predictions on the covariate differences of each pair.
    pub fn from_goal_model<M: GoalModel + ?Sized>(model: &M, features: &[FeatureVec]) -> Self {
        Self::from_fn(features.len(), |i, j| model.predict(&feature_diff(&features[i], &features[j])))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> MatchIntensities {
        MatchIntensities::new(self.lambda[i * self.n + j], self.lambda[j * self.n + i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Group,
    Knockout,
    ExtraTime,
}

/// Produces a score for a fixture. The Poisson sampler is the real one;
/// tests plug in deterministic stubs.
pub trait ScoreSampler {
    fn score<R: Rng + ?Sized>(
        &mut self,
        team1: usize,
        team2: usize,
        m: MatchIntensities,
        phase: Phase,
        rng: &mut R,
    ) -> (u32, u32);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PoissonSampler;

impl ScoreSampler for PoissonSampler {
    fn score<R: Rng + ?Sized>(&mut self, _: usize, _: usize, m: MatchIntensities, _: Phase, rng: &mut R) -> (u32, u32) {
        sample_score(m, rng)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStanding {
    pub team: usize,
    pub played: u32,
    pub wins: u32,
    pub draws: u32,
    pub losses: u32,
    pub goals_for: u32,
    pub goals_against: u32,
    pub points: u32,
}

impl GroupStanding {
    pub fn goal_diff(&self) -> i64 {
        self.goals_for as i64 - self.goals_against as i64
    }

    fn record(&mut self, scored: u32, conceded: u32) {
        self.played += 1;
        self.goals_for += scored;
        self.goals_against += conceded;
        match scored.cmp(&conceded) {
            Ordering::Greater => {
                self.wins += 1;
                self.points += 3;
            }
            Ordering::Equal => {
                self.draws += 1;
                self.points += 1;
            }
            Ordering::Less => self.losses += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupMatch {
    pub team1: usize,
    pub team2: usize,
    pub goals1: u32,
    pub goals2: u32,
}

#[derive(Debug, Clone)]
pub struct GroupResult {
    /// Final order, first to fourth.
    pub standings: [GroupStanding; GROUP_SIZE],
    pub matches: Vec<GroupMatch>,
}

/// Fixture order within a group of four (indices into the group).
const GROUP_FIXTURES: [(usize, usize); 6] = [(0, 1), (2, 3), (0, 2), (3, 1), (3, 0), (1, 2)];

pub fn play_group<S: ScoreSampler, R: Rng + ?Sized>(
    members: &[usize; GROUP_SIZE],
    table: &IntensityTable,
    sampler: &mut S,
    rng: &mut R,
) -> GroupResult {
    let matches: Vec<GroupMatch> = GROUP_FIXTURES
        .iter()
        .map(|&(a, b)| {
            let (t1, t2) = (members[a], members[b]);
            let (g1, g2) = sampler.score(t1, t2, table.get(t1, t2), Phase::Group, rng);
            GroupMatch {
                team1: t1,
                team2: t2,
                goals1: g1,
                goals2: g2,
            }
        })
        .collect();
    let order = rank_group(members, &matches, rng);
    let standings = order.map(|t| standing_of(t, &matches, None));
    GroupResult { standings, matches }
}

/// Record of `team` over `matches`, optionally only against `among`.
fn standing_of(team: usize, matches: &[GroupMatch], among: Option<&[usize]>) -> GroupStanding {
    let mut s = GroupStanding {
        team,
        ..Default::default()
    };
    for m in matches {
        let (me, other, gf, ga) = if m.team1 == team {
            (m.team1, m.team2, m.goals1, m.goals2)
        } else if m.team2 == team {
            (m.team2, m.team1, m.goals2, m.goals1)
        } else {
            continue;
        };
        debug_assert_eq!(me, team);
        if among.is_some_and(|set| !set.contains(&other)) {
            continue;
        }
        s.record(gf, ga);
    }
    s
}

/// Group ranking: points; then among tied teams head-to-head points, goal
/// difference and goals (reapplied to any subset still tied); then overall
/// goal difference and goals; then a random draw.
pub fn rank_group<R: Rng + ?Sized>(members: &[usize; GROUP_SIZE], matches: &[GroupMatch], rng: &mut R) -> [usize; GROUP_SIZE] {
    let overall: Vec<GroupStanding> = members.iter().map(|&t| standing_of(t, matches, None)).collect();
    let points = |t: usize| overall.iter().find(|s| s.team == t).expect("member").points;

    let mut sorted: Vec<usize> = members.to_vec();
    sorted.sort_by_key(|&t| std::cmp::Reverse(points(t)));
    let mut out = Vec::with_capacity(GROUP_SIZE);
    for block in split_by(&sorted, |t| points(*t) as i64) {
        if block.len() == 1 {
            out.extend(block);
        } else {
            out.extend(resolve_tie(&block, matches, &overall, rng));
        }
    }
    out.try_into().expect("four teams")
}

fn resolve_tie<R: Rng + ?Sized>(
    tied: &[usize],
    matches: &[GroupMatch],
    overall: &[GroupStanding],
    rng: &mut R,
) -> Vec<usize> {
    let h2h_key = |t: usize| {
        let s = standing_of(t, matches, Some(tied));
        (s.points as i64, s.goal_diff(), s.goals_for as i64)
    };
    let mut order = tied.to_vec();
    order.sort_by(|a, b| h2h_key(*b).cmp(&h2h_key(*a)));
    let blocks = split_by(&order, |t| h2h_key(*t));
    if blocks.len() > 1 {
        return blocks
            .into_iter()
            .flat_map(|b| {
                if b.len() == 1 {
                    b
                } else {
                    resolve_tie(&b, matches, overall, rng)
                }
            })
            .collect();
    }
    let overall_key = |t: usize| {
        let s = overall.iter().find(|s| s.team == t).expect("member");
        (s.goal_diff(), s.goals_for as i64)
    };
    order.sort_by(|a, b| overall_key(*b).cmp(&overall_key(*a)));
    split_by(&order, |t| overall_key(*t))
        .into_iter()
        .flat_map(|mut b| {
            b.shuffle(rng);
            b
        })
        .collect()
}

/// Consecutive runs of equal key in an already sorted slice.
fn split_by<K: PartialEq>(items: &[usize], key: impl Fn(&usize) -> K) -> Vec<Vec<usize>> {
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for item in items {
        match blocks.last_mut() {
            Some(b) if key(&b[0]) == key(item) => b.push(*item),
            _ => blocks.push(vec![*item]),
        }
    }
    blocks
}

#[derive(Debug, Clone)]
pub struct GroupStageResult {
    pub groups: Vec<GroupResult>,
    /// Groups whose third-placed team advanced, best first.
    pub qualified_thirds: Vec<usize>,
    pub round_of_16: [(usize, usize); 8],
}

impl GroupStageResult {
    pub fn qualified(&self) -> Vec<usize> {
        self.round_of_16.iter().flat_map(|(a, b)| [*a, *b]).collect()
    }
}

/// Best third-placed teams: points, goal difference, goals, then random.
pub fn rank_thirds<R: Rng + ?Sized>(thirds: &[GroupStanding], rng: &mut R) -> Vec<usize> {
    let key = |g: &usize| {
        let s = &thirds[*g];
        (s.points as i64, s.goal_diff(), s.goals_for as i64)
    };
    let mut order: Vec<usize> = (0..thirds.len()).collect();
    order.sort_by(|a, b| key(b).cmp(&key(a)));
    split_by(&order, key)
        .into_iter()
        .flat_map(|mut b| {
            b.shuffle(rng);
            b
        })
        .collect()
}

pub fn simulate_group_stage<S: ScoreSampler, R: Rng + ?Sized>(
    config: &TournamentConfig,
    table: &IntensityTable,
    sampler: &mut S,
    rng: &mut R,
) -> GroupStageResult {
    let groups: Vec<GroupResult> = config
        .groups
        .iter()
        .map(|members| play_group(members, table, sampler, rng))
        .collect();
    let thirds: Vec<GroupStanding> = groups.iter().map(|g| g.standings[2]).collect();
    let mut qualified_thirds = rank_thirds(&thirds, rng);
    qualified_thirds.truncate(N_THIRDS_QUALIFYING);
    let winners: Vec<usize> = groups.iter().map(|g| g.standings[0].team).collect();
    let runners: Vec<usize> = groups.iter().map(|g| g.standings[1].team).collect();
    let third_teams: Vec<usize> = thirds.iter().map(|s| s.team).collect();
    let round_of_16 = config.round_of_16_teams(&winners, &runners, &third_teams, &qualified_thirds);
    GroupStageResult {
        groups,
        qualified_thirds,
        round_of_16,
    }
}

/// Regular time, then extra time at a third of the intensities, then a coin.
pub fn play_knockout_tie<S: ScoreSampler, R: Rng + ?Sized>(
    a: usize,
    b: usize,
    table: &IntensityTable,
    sampler: &mut S,
    rng: &mut R,
) -> usize {
    let m = table.get(a, b);
    let (ga, gb) = sampler.score(a, b, m, Phase::Knockout, rng);
    if ga != gb {
        return if ga > gb { a } else { b };
    }
    let (ea, eb) = sampler.score(a, b, m.scaled(EXTRA_TIME_FACTOR), Phase::ExtraTime, rng);
    if ea != eb {
        return if ea > eb { a } else { b };
    }
    if rng.random_bool(0.5) {
        a
    } else {
        b
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnockoutResult {
    pub round_of_16: Vec<usize>,
    pub quarter_finals: Vec<usize>,
    pub semi_finals: Vec<usize>,
    pub final_pair: Vec<usize>,
    pub champion: usize,
}

/// Plays the bracket; winners of consecutive ties meet in the next round.
pub fn simulate_knockout<S: ScoreSampler, R: Rng + ?Sized>(
    round_of_16: &[(usize, usize); 8],
    table: &IntensityTable,
    sampler: &mut S,
    rng: &mut R,
) -> KnockoutResult {
    let r16: Vec<usize> = round_of_16.iter().flat_map(|(a, b)| [*a, *b]).collect();
    let mut round = r16.clone();
    let mut survivors = Vec::new();
    while round.len() > 1 {
        round = round
            .chunks(2)
            .map(|p| play_knockout_tie(p[0], p[1], table, sampler, rng))
            .collect();
        survivors.push(round.clone());
    }
    KnockoutResult {
        round_of_16: r16,
        quarter_finals: survivors[0].clone(),
        semi_finals: survivors[1].clone(),
        final_pair: survivors[2].clone(),
        champion: survivors[3][0],
    }
}

/// Stage reached per team in one tournament, 0 = out in the group stage and
/// 5 = champion.
pub fn simulate_tournament<S: ScoreSampler, R: Rng + ?Sized>(
    config: &TournamentConfig,
    table: &IntensityTable,
    sampler: &mut S,
    rng: &mut R,
) -> (GroupStageResult, KnockoutResult) {
    let gs = simulate_group_stage(config, table, sampler, rng);
    let ko = simulate_knockout(&gs.round_of_16, table, sampler, rng);
    (gs, ko)
}

pub const STAGES: [&str; 5] = ["p_r16", "p_qf", "p_sf", "p_final", "p_champion"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub teams: Vec<TeamId>,
    /// Per team, replications reaching R16, QF, SF, final and winning.
    pub counts: Vec<[u64; 5]>,
    pub replications: u64,
    pub seed: u64,
}

impl StageReport {
    pub fn probabilities(&self, team: usize) -> [f64; 5] {
        let n = self.replications as f64;
        self.counts[team].map(|c| c as f64 / n)
    }

    pub fn index_of(&self, team: &TeamId) -> Option<usize> {
        self.teams.iter().position(|t| t == team)
    }

    /// Team indices by descending title probability, then reverse stage
    /// order, then name.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.teams.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ca, cb) = (self.counts[a], self.counts[b]);
            cb.iter()
                .rev()
                .cmp(ca.iter().rev())
                .then_with(|| self.teams[a].cmp(&self.teams[b]))
        });
        idx
    }

    /// `team,p_r16,p_qf,p_sf,p_final,p_champion`; probabilities with four
    /// decimals, or percentages with one decimal when `percent` is set.
    pub fn write_csv<W: Write>(&self, out: W, percent: bool) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::InvalidInput(e.to_string());
        let mut header = vec!["team"];
        header.extend(STAGES);
        wtr.write_record(&header).map_err(err)?;
        for i in self.ranked() {
            let mut rec = vec![self.teams[i].0.clone()];
            rec.extend(self.probabilities(i).iter().map(|p| {
                if percent {
                    format!("{:.1}", 100.0 * p)
                } else {
                    format!("{p:.4}")
                }
            }));
            wtr.write_record(&rec).map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::io("<output>", e))
    }
}

pub fn run_tournament_mc(
    config: &TournamentConfig,
    table: &IntensityTable,
    replications: u64,
    seed: u64,
) -> Result<StageReport> {
    run_tournament_mc_with(config, table, replications, seed, || PoissonSampler)
}

/// Like [`run_tournament_mc`] with a custom sampler per work item.
pub fn run_tournament_mc_with<S, F>(
    config: &TournamentConfig,
    table: &IntensityTable,
    replications: u64,
    seed: u64,
    make_sampler: F,
) -> Result<StageReport>
where
    S: ScoreSampler,
    F: Fn() -> S + Sync,
{
    if replications == 0 {
        return Err(Error::InvalidInput("replications must be positive".into()));
    }
    let n = config.teams.len();
    if table.len() != n {
        return Err(Error::InvalidInput(format!(
            "intensity table covers {} teams, tournament has {n}",
            table.len()
        )));
    }
    let chunks = replications.div_ceil(CHUNK);
    let partial: Vec<Vec<[u64; 5]>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![[0u64; 5]; n];
            let mut sampler = make_sampler();
            let end = ((c + 1) * CHUNK).min(replications);
            for rep in c * CHUNK..end {
                let mut rng = replication_rng(seed, rep);
                let (_, ko) = simulate_tournament(config, table, &mut sampler, &mut rng);
                for t in &ko.round_of_16 {
                    counts[*t][0] += 1;
                }
                for t in &ko.quarter_finals {
                    counts[*t][1] += 1;
                }
                for t in &ko.semi_finals {
                    counts[*t][2] += 1;
                }
                for t in &ko.final_pair {
                    counts[*t][3] += 1;
                }
                counts[ko.champion][4] += 1;
            }
            counts
        })
        .collect();
    let mut counts = vec![[0u64; 5]; n];
    for part in partial {
        for (acc, c) in counts.iter_mut().zip(part) {
            for s in 0..5 {
                acc[s] += c[s];
            }
        }
    }
    Ok(StageReport {
        teams: config.teams.clone(),
        counts,
        replications,
        seed,
    })
}

/// Probability that `a` wins a knockout tie against `b`.
pub fn knockout_win_probability(m: MatchIntensities) -> f64 {
    let regular = outcome_probs(m);
    let extra = outcome_probs(m.scaled(EXTRA_TIME_FACTOR));
    regular.win1 + regular.draw * (extra.win1 + 0.5 * extra.draw)
}

/// Title probability per team, averaging over sampled group stages the
/// exact probability of winning the resulting bracket.
///
/// Conditioning on the group stage removes the knockout-stage sampling
/// noise, which matters when the estimate is fed back into an iterative fit.
pub fn winner_probabilities(
    config: &TournamentConfig,
    table: &IntensityTable,
    simulations: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if simulations == 0 {
        return Err(Error::InvalidInput("simulations must be positive".into()));
    }
    let n = config.teams.len();
    let mut beats = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                beats[i * n + j] = knockout_win_probability(table.get(i, j));
            }
        }
    }
    let chunks = simulations.div_ceil(CHUNK);
    let partial: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; n];
            let end = ((c + 1) * CHUNK).min(simulations);
            for rep in c * CHUNK..end {
                let mut rng = replication_rng(seed, rep);
                let gs = simulate_group_stage(config, table, &mut PoissonSampler, &mut rng);
                for (team, p) in bracket_title_probabilities(&gs.round_of_16, &beats, n) {
                    acc[team] += p;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for part in partial {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(total.into_iter().map(|v| v / simulations as f64).collect())
}

/// Exact title distribution of a fixed 16-team bracket.
fn bracket_title_probabilities(round_of_16: &[(usize, usize); 8], beats: &[f64], n: usize) -> Vec<(usize, f64)> {
    let mut nodes: Vec<Vec<(usize, f64)>> = round_of_16
        .iter()
        .flat_map(|(a, b)| [vec![(*a, 1.0)], vec![(*b, 1.0)]])
        .collect();
    while nodes.len() > 1 {
        nodes = nodes
            .chunks(2)
            .map(|pair| {
                let (left, right) = (&pair[0], &pair[1]);
                let mut out = Vec::with_capacity(left.len() + right.len());
                for &(a, pa) in left {
                    let w: f64 = right.iter().map(|&(b, pb)| pb * beats[a * n + b]).sum();
                    out.push((a, pa * w));
                }
                for &(b, pb) in right {
                    let w: f64 = left.iter().map(|&(a, pa)| pa * beats[b * n + a]).sum();
                    out.push((b, pb * w));
                }
                out
            })
            .collect();
    }
    nodes.pop().expect("one node left")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Replays fixed scores keyed by team pair; unknown pairs are 0-0.
    struct Scripted(Vec<((usize, usize), (u32, u32))>);

    impl ScoreSampler for Scripted {
        fn score<R: Rng + ?Sized>(&mut self, a: usize, b: usize, _: MatchIntensities, _: Phase, _: &mut R) -> (u32, u32) {
            for &((x, y), (gx, gy)) in &self.0 {
                if (x, y) == (a, b) {
                    return (gx, gy);
                }
                if (x, y) == (b, a) {
                    return (gy, gx);
                }
            }
            (0, 0)
        }
    }

    #[test]
    fn dominant_team_tops_group() {
        let members = [0, 1, 2, 3];
        let table = IntensityTable::constant(4, 1.0);
        let mut s = Scripted(vec![((3, 0), (3, 0)), ((3, 1), (3, 0)), ((3, 2), (3, 0))]);
        let mut rng = replication_rng(1, 0);
        let res = play_group(&members, &table, &mut s, &mut rng);
        assert_eq!(res.standings[0].team, 3);
        assert_eq!(res.standings[0].points, 9);
        let gd: i64 = res.standings.iter().map(|s| s.goal_diff()).sum();
        assert_eq!(gd, 0);
        for s in &res.standings {
            assert_eq!(s.points, 3 * s.wins + s.draws);
        }
    }

    #[test]
    fn circular_tie_uses_overall_goals() {
        // A(0) beats B(1), B beats C(2), C beats A, all 1-0. Draws with D(3):
        // A 2-2, B 1-1, C 0-0. A, B, C have 4 points; head-to-head is level
        // (3 pts, 0 GD, 1 goal each), overall GD is 0 for all three, overall
        // goals 3, 2, 1. D has 3 points.
        let members = [0, 1, 2, 3];
        let matches = vec![
            GroupMatch { team1: 0, team2: 1, goals1: 1, goals2: 0 },
            GroupMatch { team1: 1, team2: 2, goals1: 1, goals2: 0 },
            GroupMatch { team1: 2, team2: 0, goals1: 1, goals2: 0 },
            GroupMatch { team1: 0, team2: 3, goals1: 2, goals2: 2 },
            GroupMatch { team1: 1, team2: 3, goals1: 1, goals2: 1 },
            GroupMatch { team1: 2, team2: 3, goals1: 0, goals2: 0 },
        ];
        for seed in 0..20 {
            let mut rng = replication_rng(seed, 0);
            assert_eq!(rank_group(&members, &matches, &mut rng), [0, 1, 2, 3]);
        }
    }

    #[test]
    fn head_to_head_beats_goal_difference() {
        // B and C on 6 points; C has the better overall goal difference but
        // B won the direct match.
        let matches = vec![
            GroupMatch { team1: 1, team2: 2, goals1: 1, goals2: 0 },
            GroupMatch { team1: 2, team2: 0, goals1: 5, goals2: 0 },
            GroupMatch { team1: 2, team2: 3, goals1: 5, goals2: 0 },
            GroupMatch { team1: 1, team2: 0, goals1: 1, goals2: 0 },
            GroupMatch { team1: 3, team2: 1, goals1: 1, goals2: 0 },
            GroupMatch { team1: 0, team2: 3, goals1: 0, goals2: 1 },
        ];
        let mut rng = replication_rng(3, 0);
        let order = rank_group(&[0, 1, 2, 3], &matches, &mut rng);
        // D(3) also has 6 points: three-way tie B, C, D in head-to-head:
        // B beat C, D beat B, C beat D -> each 3 pts; h2h GD: B 0, C +4, D -4.
        assert_eq!(order, [2, 1, 3, 0]);
    }

    #[test]
    fn full_tie_is_random_but_seeded() {
        let matches: Vec<GroupMatch> = GROUP_FIXTURES
            .iter()
            .map(|&(a, b)| GroupMatch { team1: a, team2: b, goals1: 1, goals2: 1 })
            .collect();
        let mut firsts = std::collections::BTreeSet::new();
        for seed in 0..200 {
            let mut rng = replication_rng(seed, 0);
            firsts.insert(rank_group(&[0, 1, 2, 3], &matches, &mut rng)[0]);
        }
        assert_eq!(firsts.len(), 4);
        let a = rank_group(&[0, 1, 2, 3], &matches, &mut replication_rng(9, 9));
        let b = rank_group(&[0, 1, 2, 3], &matches, &mut replication_rng(9, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn extra_time_uses_a_third() {
        struct Capture(Vec<MatchIntensities>);
        impl ScoreSampler for Capture {
            fn score<R: Rng + ?Sized>(&mut self, _: usize, _: usize, m: MatchIntensities, _: Phase, _: &mut R) -> (u32, u32) {
                self.0.push(m);
                (0, 0)
            }
        }
        let table = IntensityTable::from_fn(2, |i, _| if i == 0 { 1.5 } else { 0.9 });
        let mut cap = Capture(Vec::new());
        play_knockout_tie(0, 1, &table, &mut cap, &mut replication_rng(0, 0));
        assert_eq!(cap.0.len(), 2);
        assert!((cap.0[1].lambda1 - 0.5).abs() < 1e-15);
        assert!((cap.0[1].lambda2 - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bracket_probabilities_sum_to_one() {
        let n = 16;
        let table = IntensityTable::from_fn(n, |i, j| (0.1 * (i as f64 - j as f64)).exp());
        let mut beats = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    beats[i * n + j] = knockout_win_probability(table.get(i, j));
                }
            }
        }
        let r16: [(usize, usize); 8] = std::array::from_fn(|k| (2 * k, 2 * k + 1));
        let probs = bracket_title_probabilities(&r16, &beats, n);
        let total: f64 = probs.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(knockout_win_probability(table.get(3, 3)).is_finite());
        let even = knockout_win_probability(MatchIntensities::new(1.2, 1.2));
        assert!((even - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_replications_rejected() {
        let cfg = TournamentConfig::euro2024();
        let table = IntensityTable::constant(24, 1.2);
        assert!(run_tournament_mc(&cfg, &table, 0, 1).is_err());
        assert!(run_tournament_mc(&cfg, &IntensityTable::constant(4, 1.0), 10, 1).is_err());
    }

    #[test]
    fn group_size_constants() {
        assert_eq!(GROUP_FIXTURES.len() * crate::tournament::N_GROUPS, 36);
    }
}
