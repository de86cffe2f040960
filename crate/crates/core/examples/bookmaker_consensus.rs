//! Consensus winning probabilities from the 2024 outright odds, then team
//! abilities by inverse tournament simulation.
//!
//! cargo run --release --example bookmaker_consensus

use std::path::Path;
use std::time::Instant;

use eurocast::bookmaker::{fit_consensus_abilities, load_odds, Consensus, InverseFitConfig};
use eurocast::data::TeamRegistry;
use eurocast::tournament::TournamentConfig;

fn main() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/odds2024.csv");
    let sheets = load_odds(&path, &TeamRegistry::euro2024())?;
    let consensus = Consensus::from_sheets(&sheets)?;
    println!("{} bookmakers, median margin {:.2}%", sheets.len(), 100.0 * consensus.margin());

    let config = TournamentConfig::euro2024();
    let probs = consensus.win_probabilities();
    let start = Instant::now();
    let fit = fit_consensus_abilities(&probs, &config, &InverseFitConfig::default())?;
    println!(
        "converged after {} iterations in {:.1?}, loss {:.4}, check on fresh draws {:.4}",
        fit.loss_trace.len(),
        start.elapsed(),
        fit.final_loss(),
        fit.verification_rmse.unwrap_or(f64::NAN)
    );
    println!("{:<16} {:>9} {:>8} {:>8}", "team", "ability", "target", "sim");
    for i in fit.ranking() {
        println!(
            "{:<16} {:>9.3} {:>7.1}% {:>7.1}%",
            fit.teams[i].as_str(),
            fit.logability[i],
            100.0 * fit.win_prob[i],
            100.0 * fit.simulated_prob[i]
        );
    }
    Ok(())
}
