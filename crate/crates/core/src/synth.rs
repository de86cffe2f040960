//! Synthetic data with known generating parameters, for tests, examples
//! and demonstrations of the command-line pipeline.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bookmaker::{quote_odds, OddsSheet};
use crate::data::{MatchRecord, MatchType, TeamFeatureVector, TeamId};
use crate::error::Result;
use crate::match_prob::sample_poisson;
use crate::plus_minus::{EventType, MatchEvent, MatchSheet, PlayerInfo};
use crate::tournament::TournamentConfig;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// International results drawn from `log lambda = intercept + r_i - r_j
/// + home` over the `years` before `reference`, with a mix of match types
/// and about a third of the matches at neutral venues.
pub fn history(
    abilities: &BTreeMap<TeamId, f64>,
    intercept: f64,
    home: f64,
    n_matches: usize,
    reference: NaiveDate,
    years: f64,
    seed: u64,
) -> Vec<MatchRecord> {
    let mut rng = rng(seed);
    let teams: Vec<(&TeamId, f64)> = abilities.iter().map(|(t, r)| (t, *r)).collect();
    let span = (years * 365.25) as i64;
    let types = [
        MatchType::WorldCup,
        MatchType::ConfederationTournament,
        MatchType::Qualifier,
        MatchType::FriendlyOther,
    ];
    let mut out = Vec::with_capacity(n_matches);
    while out.len() < n_matches {
        let i = rng.random_range(0..teams.len());
        let j = rng.random_range(0..teams.len());
        if i == j {
            continue;
        }
        let neutral = rng.random_bool(1.0 / 3.0);
        let h = if neutral { 0.0 } else { home };
        let (ti, ri) = teams[i];
        let (tj, rj) = teams[j];
        out.push(MatchRecord {
            date: reference - Duration::days(rng.random_range(0..=span)),
            home_team: ti.clone(),
            away_team: tj.clone(),
            goals_home: sample_poisson((intercept + ri - rj + h).exp(), &mut rng),
            goals_away: sample_poisson((intercept + rj - ri).exp(), &mut rng),
            venue_country: if neutral { "Neutral".into() } else { ti.0.clone() },
            neutral,
            match_type: types[rng.random_range(0..types.len())],
        });
    }
    out.sort_by(|a, b| a.date.cmp(&b.date));
    out
}

/// `n` abilities evenly spaced by `spacing`, centred on zero, keyed by the
/// supplied team names.
pub fn spaced_abilities(teams: &[TeamId], spacing: f64) -> BTreeMap<TeamId, f64> {
    let mid = (teams.len() as f64 - 1.0) / 2.0;
    teams
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), (mid - i as f64) * spacing))
        .collect()
}

/// Team names `T01`, `T02`, ...
pub fn team_names(n: usize) -> Vec<TeamId> {
    (1..=n).map(|i| TeamId::new(format!("T{i:02}"))).collect()
}

/// A set of tournament editions with covariates and results.
#[derive(Debug, Clone)]
pub struct SyntheticEditions {
    pub features: Vec<TeamFeatureVector>,
    pub matches: Vec<MatchRecord>,
    /// Latent strength per (year, team) that drives both covariates and goals.
    pub strength: BTreeMap<(i32, TeamId), f64>,
}

/// Editions in which every team of `teams` takes part. Covariates are noisy functions of a
/// latent strength `s`; goals are Poisson with
/// `log lambda = 0.2 + 0.4 (s_team - s_opponent)`. Each edition plays
/// round-robin groups of four and a single-elimination bracket among the
/// group winners and runners-up.
pub fn editions(years: &[i32], teams: &[TeamId], seed: u64) -> SyntheticEditions {
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = SyntheticEditions {
        features: Vec::new(),
        matches: Vec::new(),
        strength: BTreeMap::new(),
    };
    let mut base: Vec<f64> = teams.iter().map(|_| noise.sample(&mut rng)).collect();
    for &year in years {
        for b in base.iter_mut() {
            *b = 0.8 * *b + 0.6 * noise.sample(&mut rng);
        }
        let mut order: Vec<usize> = (0..teams.len()).collect();
        order.sort_by(|a, b| base[*b].total_cmp(&base[*a]));
        for (rank, &i) in order.iter().enumerate() {
            let s = base[i];
            let e = |rng: &mut ChaCha8Rng, sd: f64| sd * noise.sample(rng);
            out.strength.insert((year, teams[i].clone()), s);
            out.features.push(TeamFeatureVector {
                tournament_year: year,
                team: teams[i].clone(),
                gdp_log: 10.5 + 0.3 * s + e(&mut rng, 0.6),
                market_value_log: 5.5 + 0.8 * s + e(&mut rng, 0.3),
                fifa_rank: (rank as u32) * 2 + 1 + rng.random_range(0..2),
                uefa_points: 1.6 + 0.25 * s + e(&mut rng, 0.15),
                cl_players: (2.0 + 2.0 * s + e(&mut rng, 1.0)).round().max(0.0),
                hist_ability: 0.3 * s + e(&mut rng, 0.1),
                logability: 0.25 * s + e(&mut rng, 0.08),
                ave_pm: 0.1 * s + e(&mut rng, 0.05),
            });
        }
        let start = NaiveDate::from_ymd_opt(year, 6, 10).expect("valid date");
        let play = |rng: &mut ChaCha8Rng, a: usize, b: usize, day: i64| {
            let d = base[a] - base[b];
            MatchRecord {
                date: start + Duration::days(day),
                home_team: teams[a].clone(),
                away_team: teams[b].clone(),
                goals_home: sample_poisson((0.2 + 0.4 * d).exp(), rng),
                goals_away: sample_poisson((0.2 - 0.4 * d).exp(), rng),
                venue_country: "Host".into(),
                neutral: true,
                match_type: MatchType::ConfederationTournament,
            }
        };
        let mut shuffled: Vec<usize> = (0..teams.len()).collect();
        for k in (1..shuffled.len()).rev() {
            shuffled.swap(k, rng.random_range(0..=k));
        }
        let mut advancing = Vec::new();
        for group in shuffled.chunks(4) {
            let mut pts = vec![0i64; group.len()];
            for x in 0..group.len() {
                for y in x + 1..group.len() {
                    let m = play(&mut rng, group[x], group[y], (x + y) as i64);
                    match m.goals_home.cmp(&m.goals_away) {
                        std::cmp::Ordering::Greater => pts[x] += 3,
                        std::cmp::Ordering::Less => pts[y] += 3,
                        std::cmp::Ordering::Equal => {
                            pts[x] += 1;
                            pts[y] += 1;
                        }
                    }
                    out.matches.push(m);
                }
            }
            let mut idx: Vec<usize> = (0..group.len()).collect();
            idx.sort_by(|a, b| pts[*b].cmp(&pts[*a]));
            advancing.extend(idx.iter().take(2).map(|k| group[*k]));
        }
        let mut day = 14;
        while advancing.len() > 1 {
            let mut next = Vec::new();
            for pair in advancing.chunks(2) {
                if pair.len() < 2 {
                    next.push(pair[0]);
                    continue;
                }
                let m = play(&mut rng, pair[0], pair[1], day);
                let w = match m.goals_home.cmp(&m.goals_away) {
                    std::cmp::Ordering::Greater => pair[0],
                    std::cmp::Ordering::Less => pair[1],
                    std::cmp::Ordering::Equal => pair[rng.random_range(0..2)],
                };
                out.matches.push(m);
                next.push(w);
            }
            advancing = next;
            day += 4;
        }
    }
    out
}

/// Bookmaker sheets whose quoted odds are the fair odds of `probs`
/// with payout share drawn from `delta_range`, perturbed by
/// multiplicative noise of relative size `noise`.
pub fn odds_sheets(
    probs: &BTreeMap<TeamId, f64>,
    n_bookmakers: usize,
    delta_range: (f64, f64),
    noise: f64,
    seed: u64,
) -> Result<Vec<OddsSheet>> {
    let mut rng = rng(seed);
    let mut sheets = Vec::with_capacity(n_bookmakers);
    for b in 0..n_bookmakers {
        let delta = rng.random_range(delta_range.0..=delta_range.1);
        let mut sheet = OddsSheet::new(format!("book{:02}", b + 1));
        for (team, p) in probs {
            let fair = (1.0 - p) / p;
            let jitter = 1.0 + noise * (2.0 * rng.random::<f64>() - 1.0);
            let q = quote_odds(fair * jitter, delta);
            sheet.insert(team.clone(), (q * 100.0).round() / 100.0)?;
        }
        sheets.push(sheet);
    }
    Ok(sheets)
}

/// Club-level match sheets and events for plus-minus ratings.
#[derive(Debug, Clone)]
pub struct SyntheticLeague {
    pub sheets: Vec<MatchSheet>,
    pub events: Vec<MatchEvent>,
    pub players: BTreeMap<String, PlayerInfo>,
    /// National-team squads of 11 drawn from the player pool.
    pub squads: BTreeMap<String, Vec<String>>,
    pub true_ratings: BTreeMap<String, f64>,
}

/// `n_clubs` clubs of 16 players playing a double round robin per
/// season. Goal rates per 90 minutes are `exp(0.25 + rating diff / 11)`
/// per side, where the rating diff sums the on-pitch players' true ratings
/// and the home side gets an extra 0.1.
/// Each team makes up to three substitutions, and red cards are rare.
pub fn league(n_clubs: usize, seasons: usize, national_teams: &[TeamId], seed: u64) -> SyntheticLeague {
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let clubs: Vec<String> = (1..=n_clubs).map(|c| format!("C{c:02}")).collect();
    let mut roster: Vec<Vec<String>> = Vec::new();
    let mut out = SyntheticLeague {
        sheets: Vec::new(),
        events: Vec::new(),
        players: BTreeMap::new(),
        squads: BTreeMap::new(),
        true_ratings: BTreeMap::new(),
    };
    let first_season = 2024 - seasons as i32;
    for club in &clubs {
        let club_level = 0.3 * noise.sample(&mut rng);
        let mut names = Vec::new();
        for k in 0..16 {
            let name = format!("{club}P{k:02}");
            let birth = NaiveDate::from_ymd_opt(1990 + rng.random_range(0..12), 1 + rng.random_range(0..12), 1)
                .expect("valid date");
            out.true_ratings.insert(name.clone(), club_level + 0.15 * noise.sample(&mut rng));
            out.players.insert(
                name.clone(),
                PlayerInfo {
                    player: name.clone(),
                    birth_date: birth,
                    club: club.clone(),
                },
            );
            names.push(name);
        }
        roster.push(names);
    }

    let mut id = 0;
    for season in 0..seasons {
        let start = NaiveDate::from_ymd_opt(first_season + season as i32, 8, 15).expect("valid date");
        let mut day = 0;
        for a in 0..n_clubs {
            for b in 0..n_clubs {
                if a == b {
                    continue;
                }
                id += 1;
                day += 1;
                let mid = format!("g{id:05}");
                let pick = |rng: &mut ChaCha8Rng, r: &[String]| {
                    let mut v: Vec<String> = r.to_vec();
                    for k in (1..v.len()).rev() {
                        v.swap(k, rng.random_range(0..=k));
                    }
                    v
                };
                let home_pool = pick(&mut rng, &roster[a]);
                let away_pool = pick(&mut rng, &roster[b]);
                let sheet = MatchSheet {
                    match_id: mid.clone(),
                    date: start + Duration::days(day / 2),
                    competition: if season % 2 == 0 { "league" } else { "cup" }.into(),
                    neutral: false,
                    home_team: clubs[a].clone(),
                    away_team: clubs[b].clone(),
                    home_start: home_pool[..11].to_vec(),
                    away_start: away_pool[..11].to_vec(),
                };
                out.events
                    .extend(play_pm_match(&mut rng, &sheet, [&home_pool[11..], &away_pool[11..]], &out.true_ratings));
                out.sheets.push(sheet);
            }
        }
    }

    let all: Vec<&String> = out.players.keys().collect();
    for (n, team) in national_teams.iter().enumerate() {
        let squad: Vec<String> = (0..11).map(|k| all[(n * 11 + k * 7) % all.len()].clone()).collect();
        out.squads.insert(team.0.clone(), squad);
    }
    out
}

fn play_pm_match(
    rng: &mut ChaCha8Rng,
    sheet: &MatchSheet,
    bench: [&[String]; 2],
    ratings: &BTreeMap<String, f64>,
) -> Vec<MatchEvent> {
    let teams = [sheet.home_team.clone(), sheet.away_team.clone()];
    let mut on = [sheet.home_start.clone(), sheet.away_start.clone()];
    let mut changes: Vec<(u32, usize, bool)> = Vec::new();
    for side in 0..2 {
        for k in 0..rng.random_range(0..=3usize) {
            changes.push((rng.random_range(46..=85), side, k == 0 && rng.random_bool(0.02)));
        }
    }
    changes.sort();
    // One change per side and minute keeps same-minute events unambiguous.
    changes.dedup_by_key(|c| (c.0, c.1));
    let mut events = Vec::new();
    let mut used = [0usize; 2];
    let ev = |minute: u32, t: EventType, player: &str, side: usize| MatchEvent {
        match_id: sheet.match_id.clone(),
        minute: minute as f64,
        event_type: t,
        player: player.to_string(),
        team: teams[side].clone(),
    };
    let mut next_change = 0;
    for minute in 0..90u32 {
        while next_change < changes.len() && changes[next_change].0 == minute {
            let (_, side, red) = changes[next_change];
            next_change += 1;
            let k = rng.random_range(0..on[side].len());
            let out_player = on[side].remove(k);
            if red {
                events.push(ev(minute, EventType::RedCard, &out_player, side));
            } else if used[side] < bench[side].len() {
                let inp = bench[side][used[side]].clone();
                used[side] += 1;
                events.push(ev(minute, EventType::SubOff, &out_player, side));
                events.push(ev(minute, EventType::SubOn, &inp, side));
                on[side].push(inp);
            } else {
                on[side].push(out_player);
            }
        }
        let strength = |side: usize| -> f64 {
            on[side].iter().map(|p| ratings[p]).sum::<f64>() * 11.0 / on[side].len() as f64
        };
        let diff = strength(0) - strength(1);
        for side in 0..2 {
            let d = if side == 0 { diff + 1.1 } else { -diff };
            let rate = (0.25 + d / 11.0).exp() / 90.0;
            if rng.random::<f64>() < rate {
                let scorer = on[side][rng.random_range(0..on[side].len())].clone();
                events.push(ev(minute, EventType::Goal, &scorer, side));
            }
        }
    }
    events.push(ev(90, EventType::End, "", 0));
    events
}

/// One synthetic edition's covariates for the configured tournament teams.
pub fn tournament_features(config: &TournamentConfig, seed: u64) -> Vec<TeamFeatureVector> {
    editions(&[config.year], &config.teams, seed).features
}
