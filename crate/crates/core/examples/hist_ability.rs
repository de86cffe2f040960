//! Historic match abilities from eight years of synthetic international
//! results with known strengths.
//!
//! cargo run --release --example hist_ability

use chrono::NaiveDate;
use eurocast::hist_ability::{fit_hist_abilities, time_weight, HistAbilityConfig, HomeEffects, DEFAULT_HALF_PERIOD_DAYS};
use eurocast::synth;

fn main() -> anyhow::Result<()> {
    for years in [0.0, 1.0, 3.0, 6.0] {
        let w = time_weight(years * 365.25, DEFAULT_HALF_PERIOD_DAYS)?;
        println!("weight of a match {years} years back: {w:.3}");
    }

    let teams = synth::team_names(16);
    let truth = synth::spaced_abilities(&teams, 0.08);
    let as_of = NaiveDate::from_ymd_opt(2024, 6, 1).unwrap();
    let matches = synth::history(&truth, 0.1, 0.3, 8000, as_of, 8.0, 42);

    let model = fit_hist_abilities(&matches, as_of, &HistAbilityConfig::default())?;
    let home = match &model.home_effects {
        HomeEffects::Shared(h) => *h,
        HomeEffects::PerTeam(_) => f64::NAN,
    };
    println!(
        "\n{} matches, {} Newton steps, intercept {:.3} (true 0.100), home {:.3} (true 0.300)",
        model.matches_used, model.iterations, model.intercept, home
    );
    println!("{:<6} {:>8} {:>8}", "team", "fitted", "true");
    for (team, r) in model.ranking() {
        println!("{:<6} {:>8.3} {:>8.3}", team.as_str(), r, truth[&team]);
    }
    Ok(())
}
