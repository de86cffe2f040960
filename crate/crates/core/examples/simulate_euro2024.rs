//! EURO 2024 format simulation: a LASSO goal model fitted on synthetic
//! past editions drives 100,000 replications of the 24-team tournament.
//!
//! cargo run --release --example simulate_euro2024

use std::time::Instant;

use chrono::Datelike;
use eurocast::data::{build_diff_rows, FeatureTable};
use eurocast::predictors::{fit_lasso, tune_lasso, TrainingSet};
use eurocast::simulator::{run_tournament_mc, IntensityTable, STAGES};
use eurocast::synth;
use eurocast::tournament::TournamentConfig;

fn main() -> anyhow::Result<()> {
    let config = TournamentConfig::euro2024();
    let ed = synth::editions(&[2008, 2012, 2016, 2020, 2024], &config.teams, 21);
    let table = FeatureTable::new(ed.features.clone());
    let past: Vec<_> = ed.matches.iter().filter(|m| m.date.year() < 2024).cloned().collect();
    let set = TrainingSet::from_rows(&build_diff_rows(&past, &table)?);
    let model = fit_lasso(&set, tune_lasso(&set, 10, 1)?.best)?;

    let x: Vec<_> = config
        .teams
        .iter()
        .map(|t| table.get(2024, t).map(|v| v.values()).ok_or_else(|| anyhow::anyhow!("no features for {t}")))
        .collect::<anyhow::Result<_>>()?;
    let intensities = IntensityTable::from_goal_model(&model, &x);

    let start = Instant::now();
    let report = run_tournament_mc(&config, &intensities, 100_000, 2024)?;
    println!("100000 replications in {:.1?}\n", start.elapsed());
    print!("{:<16}", "team");
    for s in STAGES {
        print!(" {s:>10}");
    }
    println!();
    for i in report.ranked() {
        print!("{:<16}", report.teams[i].as_str());
        for p in report.probabilities(i) {
            print!(" {:>9.1}%", 100.0 * p);
        }
        println!();
    }
    Ok(())
}
