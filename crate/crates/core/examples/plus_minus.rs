//! Plus-minus player ratings from a synthetic club league: segments from
//! line-ups and events, ridge regression, then squad averages.
//!
//! cargo run --release --example plus_minus

use eurocast::plus_minus::{build_all_segments, fit_pm_ratings, team_ave_pm, PmConfig};
use eurocast::synth;

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn main() -> anyhow::Result<()> {
    let league = synth::league(12, 6, &synth::team_names(6), 3);
    let segments = build_all_segments(&league.sheets, &league.events)?;
    println!("{} matches cut into {} segments", league.sheets.len(), segments.len());
    let first = &segments[0];
    println!(
        "first segment: {} minute {}-{}, {} v {} players, score {}-{}",
        first.match_id,
        first.start_min,
        first.end_min,
        first.home_lineup.len(),
        first.away_lineup.len(),
        first.goals_home,
        first.goals_away
    );

    for ridge in [10.0, 100.0, 1000.0] {
        let config = PmConfig {
            ridge_strength: ridge,
            ..Default::default()
        };
        let model = fit_pm_ratings(&segments, &league.players, &config)?;
        let (fit, truth): (Vec<f64>, Vec<f64>) = model
            .player_ratings
            .iter()
            .map(|(p, r)| (*r, league.true_ratings[p]))
            .unzip();
        let home: f64 = model.home_advantage.values().sum::<f64>() / model.home_advantage.len() as f64;
        println!(
            "ridge {ridge:>5}: rating norm {:.3}, correlation with truth {:.3}, home {:+.3} goals/90, {} CG steps",
            model.rating_norm(),
            correlation(&fit, &truth),
            home,
            model.cg_iterations
        );
        if ridge == 100.0 {
            for (team, squad) in &league.squads {
                let s = team_ave_pm(&model, team, squad)?;
                println!("  {:<4} ave.PM {:+.4}", s.team, s.ave_pm);
            }
        }
    }
    Ok(())
}
