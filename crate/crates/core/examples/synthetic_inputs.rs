//! Writes a complete set of synthetic input files for the command-line
//! pipeline: results history, tournament results, team covariates,
//! outright odds, three-way match odds and club line-ups with events.
//!
//! cargo run --release --example synthetic_inputs -- demo-data

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use chrono::{Datelike, NaiveDate};
use eurocast::bookmaker::write_odds;
use eurocast::data::{write_features, write_matches};
use eurocast::match_prob::{outcome_probs, MatchIntensities};
use eurocast::plus_minus::{write_events, write_lineups, write_players, write_squads};
use eurocast::simulator::{winner_probabilities, IntensityTable};
use eurocast::synth;
use eurocast::tournament::TournamentConfig;

fn create(dir: &PathBuf, name: &str) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo-data".into()));
    std::fs::create_dir_all(&dir)?;
    let config = TournamentConfig::euro2024();
    let teams = config.teams.clone();

    let abilities = synth::spaced_abilities(&teams, 0.06);
    let as_of = NaiveDate::from_ymd_opt(2024, 6, 13).unwrap();
    let history = synth::history(&abilities, 0.1, 0.3, 6000, as_of, 8.0, 11);
    write_matches(create(&dir, "history.csv")?, &history)?;

    let years = [2004, 2008, 2012, 2016, 2020, 2024];
    let ed = synth::editions(&years, &teams, 12);
    let past: Vec<_> = ed.matches.iter().filter(|m| m.date < as_of).cloned().collect();
    write_matches(create(&dir, "tournament_matches.csv")?, &past)?;
    write_features(create(&dir, "features.csv")?, &ed.features)?;

    let mut w = create(&dir, "match_odds.csv")?;
    writeln!(w, "year,match_index,odds_win1,odds_draw,odds_win2")?;
    for (k, m) in past.iter().enumerate() {
        let year = years.iter().rev().copied().find(|y| *y <= m.date.year()).unwrap();
        let d = ed.strength[&(year, m.home_team.clone())] - ed.strength[&(year, m.away_team.clone())];
        let p = outcome_probs(MatchIntensities::new((0.2 + 0.4 * d).exp(), (0.2 - 0.4 * d).exp())).as_array();
        let o = p.map(|p| ((100.0 / (1.06 * p)).round() / 100.0).max(1.01));
        writeln!(w, "{year},{k},{},{},{}", o[0], o[1], o[2])?;
    }
    w.flush()?;

    let s: Vec<f64> = teams.iter().map(|t| 0.25 * ed.strength[&(2024, t.clone())]).collect();
    let table = IntensityTable::from_abilities(&s, 0.15);
    let p = winner_probabilities(&config, &table, 100_000, 5)?;
    let probs: BTreeMap<_, _> = teams.iter().cloned().zip(p.into_iter().map(|v| v.max(1e-4))).collect();
    let sheets = synth::odds_sheets(&probs, 12, (0.78, 0.88), 0.03, 13)?;
    write_odds(create(&dir, "odds.csv")?, &sheets)?;

    let league = synth::league(12, 4, &teams, 14);
    write_lineups(create(&dir, "lineups.csv")?, &league.sheets)?;
    write_events(create(&dir, "events.csv")?, &league.events)?;
    write_players(create(&dir, "players.csv")?, &league.players)?;
    write_squads(create(&dir, "squads.csv")?, &league.squads)?;

    println!(
        "wrote {} history matches, {} tournament matches, {} feature rows, {} odds sheets, {} club matches to {}",
        history.len(),
        past.len(),
        ed.features.len(),
        sheets.len(),
        league.sheets.len(),
        dir.display()
    );
    Ok(())
}
