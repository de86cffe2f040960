use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;

use eurocast::bookmaker::{clean_odds, quote_odds, win_probability, log_odds_against};
use eurocast::data::{build_diff_rows, read_dataset, write_dataset, FeatureTable, MatchRecord, MatchType, TeamFeatureVector, TeamId};
use eurocast::ensemble::{match_metrics, tune_weights, weight_grid, HeldOutMatch, Outcome};
use eurocast::hist_ability::time_weight;
use eurocast::match_prob::{outcome_probs, skellam_pmf, skellam_pmf_bessel, MatchIntensities};
use eurocast::plus_minus::{build_segments, fit_pm_ratings, EventType, MatchEvent, MatchSheet, PmConfig, SegmentRecord};
use eurocast::predictors::{fit_boosted, fit_forest, fit_lasso, BoostParams, ForestParams, GoalModel, TrainingSet};
use eurocast::simulator::{run_tournament_mc, IntensityTable};
use eurocast::tournament::TournamentConfig;

fn feature(year: i32, team: &str, v: [f64; 8]) -> TeamFeatureVector {
    TeamFeatureVector {
        tournament_year: year,
        team: TeamId::new(team),
        gdp_log: v[0],
        market_value_log: v[1],
        fifa_rank: 1 + (v[2].abs() * 10.0) as u32,
        uefa_points: v[3],
        cl_players: v[4].abs().round(),
        hist_ability: v[5],
        logability: v[6],
        ave_pm: v[7],
    }
}

fn vec8() -> impl Strategy<Value = [f64; 8]> {
    prop::array::uniform8(-5.0f64..5.0)
}

fn training_set() -> impl Strategy<Value = TrainingSet> {
    prop::collection::vec((vec8(), 0u32..6), 12..40).prop_map(|rows| {
        let (x, y): (Vec<_>, Vec<_>) = rows.into_iter().map(|(x, g)| (x, g as f64)).unzip();
        TrainingSet::new(x, y)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outcome_probabilities_sum_to_one_and_mirror(l1 in 0.01f64..8.0, l2 in 0.01f64..8.0) {
        let p = outcome_probs(MatchIntensities::new(l1, l2));
        let q = outcome_probs(MatchIntensities::new(l2, l1));
        prop_assert!((p.win1 + p.draw + p.win2 - 1.0).abs() < 1e-12);
        prop_assert!((p.win1 - q.win2).abs() < 1e-14);
        prop_assert!((p.draw - q.draw).abs() < 1e-14);
    }

    #[test]
    fn win_probability_grows_with_own_rate(l1 in 0.05f64..6.0, l2 in 0.05f64..6.0, bump in 0.01f64..1.0) {
        let a = outcome_probs(MatchIntensities::new(l1, l2));
        let b = outcome_probs(MatchIntensities::new(l1 + bump, l2));
        prop_assert!(b.win1 > a.win1);
        prop_assert!(b.win2 < a.win2);
    }

    #[test]
    fn skellam_forms_agree(l1 in 0.05f64..8.0, l2 in 0.05f64..8.0, k in -12i64..12) {
        let a = skellam_pmf(k, l1, l2);
        let b = skellam_pmf_bessel(k, l1, l2);
        prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn diff_rows_negate_exactly(a in vec8(), b in vec8(), g1 in 0u32..8, g2 in 0u32..8) {
        let features = FeatureTable::new([feature(2016, "A", a), feature(2016, "B", b)]);
        let m = MatchRecord {
            date: NaiveDate::from_ymd_opt(2016, 6, 20).unwrap(),
            home_team: TeamId::new("A"),
            away_team: TeamId::new("B"),
            goals_home: g1,
            goals_away: g2,
            venue_country: "France".into(),
            neutral: true,
            match_type: MatchType::ConfederationTournament,
        };
        let rows = build_diff_rows(&[m], &features).unwrap();
        prop_assert_eq!(rows.len(), 2);
        for k in 0..8 {
            prop_assert_eq!(rows[0].diff[k], -rows[1].diff[k]);
        }
        prop_assert_eq!((rows[0].goals, rows[1].goals), (g1, g2));

        let mut buf = Vec::new();
        write_dataset(&mut buf, &rows).unwrap();
        let back = read_dataset(buf.as_slice(), "mem").unwrap();
        prop_assert_eq!(back, rows);
    }

    #[test]
    fn time_weight_strictly_decreasing(d in 0.0f64..4000.0, step in 0.5f64..500.0) {
        let a = time_weight(d, 1095.75).unwrap();
        let b = time_weight(d + step, 1095.75).unwrap();
        prop_assert!(b < a && b > 0.0);
    }

    #[test]
    fn quoted_odds_round_trip(odds in 0.01f64..5000.0, delta in 0.5f64..1.0) {
        let back = clean_odds(quote_odds(odds, delta), delta).unwrap();
        prop_assert!((back - odds).abs() <= 1e-9 * odds.max(1.0));
        let l = log_odds_against(win_probability(odds.ln()));
        prop_assert!((l - odds.ln()).abs() < 1e-9);
    }

    #[test]
    fn rps_and_hits_bounded(p in prop::array::uniform3(0.001f64..1.0), o in 0usize..3) {
        let s: f64 = p.iter().sum();
        let p = p.map(|v| v / s);
        let outcome = [Outcome::Win1, Outcome::Draw, Outcome::Win2][o];
        let m = match_metrics(&p, outcome).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.rps));
        prop_assert!(m.cr == 0.0 || m.cr == 1.0);
        prop_assert!((m.ml - p[o]).abs() < 1e-15);
    }

    #[test]
    fn predictors_give_positive_rates(set in training_set(), probe in vec8()) {
        let lasso = fit_lasso(&set, 0.1).unwrap();
        let forest = fit_forest(&set, &ForestParams { trees: 20, min_leaf: 3, ..Default::default() }).unwrap();
        let boosted = fit_boosted(&set, &BoostParams { rounds: 15, ..Default::default() }).unwrap();
        let models: [&dyn GoalModel; 3] = [&lasso, &forest, &boosted];
        for m in models {
            let v = m.predict(&probe);
            prop_assert!(v > 0.0 && v.is_finite());
        }
    }

    #[test]
    fn zero_learning_rate_keeps_the_start(set in training_set(), probe in vec8(), rounds in 1usize..20) {
        let m = fit_boosted(&set, &BoostParams { rounds, learning_rate: 0.0, ..Default::default() }).unwrap();
        prop_assert!((m.predict(&probe) - set.mean_response()).abs() < 1e-12);
    }

    #[test]
    fn boosting_deviance_non_increasing(set in training_set(), depth in 1usize..4) {
        let m = fit_boosted(&set, &BoostParams { rounds: 30, max_depth: depth, ..Default::default() }).unwrap();
        for w in m.deviance_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stage_probabilities_nested(abilities in prop::collection::vec(-1.0f64..1.0, 24), seed in 0u64..1000) {
        let config = TournamentConfig::euro2024();
        let table = IntensityTable::from_abilities(&abilities, 0.1);
        let r = run_tournament_mc(&config, &table, 400, seed).unwrap();
        let totals: Vec<u64> = (0..5).map(|s| r.counts.iter().map(|c| c[s]).sum()).collect();
        prop_assert_eq!(totals, vec![16 * 400, 8 * 400, 4 * 400, 2 * 400, 400]);
        for c in &r.counts {
            for s in 1..5 {
                prop_assert!(c[s] <= c[s - 1]);
            }
        }
    }

    #[test]
    fn weight_grid_normalization(goals in prop::collection::vec((0u32..5, 0u32..5), 8..30), rates in prop::collection::vec(0.2f64..3.0, 180)) {
        let held: Vec<HeldOutMatch> = goals
            .iter()
            .enumerate()
            .map(|(i, g)| HeldOutMatch {
                year: 2020,
                match_index: i,
                team1: TeamId::new("A"),
                team2: TeamId::new("B"),
                goals: *g,
                members: [0, 1, 2].map(|m| (rates[6 * i + 2 * m], rates[6 * i + 2 * m + 1])),
            })
            .collect();
        let grid = tune_weights(&held).unwrap();
        prop_assert_eq!(grid.len(), 231);
        for norm in [|e: &eurocast::ensemble::WeightGridEntry| e.ml_norm, |e: &eurocast::ensemble::WeightGridEntry| e.rps_norm] {
            let max = grid.iter().map(norm).fold(f64::MIN, f64::max);
            let min = grid.iter().map(norm).fold(f64::MAX, f64::min);
            prop_assert!((max - 100.0).abs() < 1e-9);
            prop_assert!(min.abs() < 1e-9 || (min - 100.0).abs() < 1e-9);
        }
        for w in grid.windows(2) {
            prop_assert!(w[0].avg_norm >= w[1].avg_norm);
        }
    }
}

#[test]
fn grid_weights_on_simplex() {
    let g = weight_grid();
    assert_eq!(g.len(), 231);
    for w in g {
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(w.iter().all(|v| *v >= 0.0));
    }
}

fn sheet(id: &str) -> MatchSheet {
    MatchSheet {
        match_id: id.into(),
        date: NaiveDate::from_ymd_opt(2022, 3, 1).unwrap(),
        competition: "league".into(),
        neutral: false,
        home_team: "H".into(),
        away_team: "A".into(),
        home_start: (0..11).map(|i| format!("h{i}")).collect(),
        away_start: (0..11).map(|i| format!("a{i}")).collect(),
    }
}

/// Events for a match: goals at arbitrary minutes, and substitutions that
/// each bring on a fresh bench player.
fn events() -> impl Strategy<Value = Vec<MatchEvent>> {
    (
        prop::collection::vec((0u32..95, any::<bool>()), 0..8),
        prop::collection::vec((1u32..90, any::<bool>(), 0usize..11), 0..6),
    )
        .prop_map(|(goals, subs)| {
            let mut ev = Vec::new();
            for (m, home) in goals {
                ev.push(MatchEvent {
                    match_id: "m".into(),
                    minute: m as f64,
                    event_type: EventType::Goal,
                    player: "x".into(),
                    team: if home { "H" } else { "A" }.into(),
                });
            }
            let mut used = std::collections::BTreeSet::new();
            for (n, (m, home, k)) in subs.into_iter().enumerate() {
                let side = if home { "h" } else { "a" };
                if !used.insert((side, k)) {
                    continue;
                }
                let team = if home { "H" } else { "A" };
                ev.push(MatchEvent {
                    match_id: "m".into(),
                    minute: m as f64,
                    event_type: EventType::SubOff,
                    player: format!("{side}{k}"),
                    team: team.into(),
                });
                ev.push(MatchEvent {
                    match_id: "m".into(),
                    minute: m as f64,
                    event_type: EventType::SubOn,
                    player: format!("{side}b{n}"),
                    team: team.into(),
                });
            }
            ev
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn segments_partition_the_match(ev in events()) {
        let segs = build_segments(&sheet("m"), &ev).unwrap();
        let end = ev.iter().map(|e| e.minute).fold(90.0, f64::max);
        prop_assert_eq!(segs[0].start_min, 0.0);
        prop_assert_eq!(segs.last().unwrap().end_min, end);
        for w in segs.windows(2) {
            prop_assert_eq!(w[0].end_min, w[1].start_min);
        }
        let home_goals = ev.iter().filter(|e| e.event_type == EventType::Goal && e.team == "H").count() as u32;
        let away_goals = ev.iter().filter(|e| e.event_type == EventType::Goal && e.team == "A").count() as u32;
        prop_assert_eq!(segs.iter().map(|s| s.goals_home).sum::<u32>(), home_goals);
        prop_assert_eq!(segs.iter().map(|s| s.goals_away).sum::<u32>(), away_goals);
        for s in &segs {
            prop_assert!(s.home_lineup.len() <= 11 && s.away_lineup.len() <= 11);
            prop_assert!(s.end_min > s.start_min);
        }
    }

    #[test]
    fn pm_label_swap_negates(goals in prop::collection::vec((0u32..3, 0u32..3), 8..20), ridge in 0.5f64..20.0) {
        let segs: Vec<SegmentRecord> = goals
            .iter()
            .enumerate()
            .map(|(i, g)| SegmentRecord {
                match_id: format!("m{i}"),
                start_min: 0.0,
                end_min: 90.0,
                home_lineup: (0..3).map(|k| format!("p{}", (i + k) % 6)).collect(),
                away_lineup: (0..3).map(|k| format!("p{}", 6 + (2 * i + k) % 5)).collect(),
                red_home: 0,
                red_away: 0,
                goals_home: g.0,
                goals_away: g.1,
                competition: "c".into(),
                match_date: NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(),
                neutral: false,
                pre_segment_score_diff: 0,
            })
            .collect();
        let config = PmConfig::players_only(ridge);
        let a = fit_pm_ratings(&segs, &BTreeMap::new(), &config).unwrap();
        // Swapped line-ups with the same goals: the design changes sign, the response does not.
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
            prop_assert!((r + b.player_ratings[p]).abs() < 1e-8);
        }
        let bigger = fit_pm_ratings(&segs, &BTreeMap::new(), &PmConfig::players_only(ridge * 2.0)).unwrap();
        prop_assert!(bigger.rating_norm() <= a.rating_norm() + 1e-12);
    }
}

#[test]
fn home_side_always_winning_splits_signs() {
    let segs: Vec<SegmentRecord> = (0..30)
        .map(|i| SegmentRecord {
            match_id: format!("m{i}"),
            start_min: 0.0,
            end_min: 90.0,
            home_lineup: (0..11).map(|k| format!("h{k}")).collect(),
            away_lineup: (0..11).map(|k| format!("a{k}")).collect(),
            red_home: 0,
            red_away: 0,
            goals_home: 1,
            goals_away: 0,
            competition: "c".into(),
            match_date: NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(),
            neutral: true,
            pre_segment_score_diff: 0,
        })
        .collect();
    let m = fit_pm_ratings(&segs, &BTreeMap::new(), &PmConfig::players_only(5.0)).unwrap();
    let h = m.player_ratings["h0"];
    assert!(h > 0.0);
    for (p, r) in &m.player_ratings {
        let expected = if p.starts_with('h') { h } else { -h };
        assert!((r - expected).abs() < 1e-10, "{p}: {r}");
    }
}
