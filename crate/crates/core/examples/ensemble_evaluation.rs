//! Leave-one-tournament-out evaluation of the three goal models, the
//! weight grid search for the combined model and permutation importance.
//!
//! cargo run --release --example ensemble_evaluation

use eurocast::data::{build_diff_rows, FeatureTable, FEATURE_NAMES};
use eurocast::ensemble::{fit_members, loto_cv, permutation_importance, tune_weights, Permutation, PipelineSpec, MEMBER_NAMES};
use eurocast::predictors::{ForestParams, TrainingSet};
use eurocast::synth;

fn main() -> anyhow::Result<()> {
    let ed = synth::editions(&[2008, 2012, 2016, 2020, 2024], &synth::team_names(24), 7);
    let rows = build_diff_rows(&ed.matches, &FeatureTable::new(ed.features))?;
    let spec = PipelineSpec {
        folds: 5,
        forest: ForestParams {
            trees: 300,
            ..Default::default()
        },
        ..Default::default()
    };

    let loto = loto_cv(&rows, &spec)?;
    for f in &loto.folds {
        println!(
            "held out {}: {} matches, lasso penalty {:.4}, mtry {}, boosting depth {} x {} rounds",
            f.year, f.test_matches, f.lasso_penalty, f.mtry, f.boost.max_depth, f.boost.rounds
        );
    }
    println!("\n{:<8} {:>6} {:>6} {:>6} {:>6} {:>6}", "model", "ML", "CR", "RPS", "MAE", "MAEd");
    for (name, r) in MEMBER_NAMES.iter().zip(loto.member_reports()?) {
        println!(
            "{name:<8} {:>6.3} {:>6.3} {:>6.4} {:>6.3} {:>6.3}",
            r.ml,
            r.cr,
            r.rps,
            r.mae_goals.unwrap_or(f64::NAN),
            r.mae_goaldiff.unwrap_or(f64::NAN)
        );
    }

    let grid = tune_weights(&loto.held_out)?;
    println!("\nbest of {} weightings (lasso, forest, xgboost):", grid.len());
    for e in grid.iter().take(5) {
        println!(
            "  {:.2} {:.2} {:.2}  ML {:.2} CR {:.2} RPS {:.2}  avg {:.2}",
            e.weights[0], e.weights[1], e.weights[2], e.ml_norm, e.cr_norm, e.rps_norm, e.avg_norm
        );
    }

    let set = TrainingSet::from_rows(&rows);
    let members = fit_members(&set, &spec)?;
    let model = members.combined(grid[0].weights)?;
    let imp = permutation_importance(&model, &set, 10, 1, Permutation::Random)?;
    let mut order: Vec<usize> = (0..imp.len()).collect();
    order.sort_by(|a, b| imp[*b].total_cmp(&imp[*a]));
    println!("\npermutation importance (MAE increase):");
    for k in order {
        println!("  {:<17} {:.4}", FEATURE_NAMES[k], imp[k]);
    }
    Ok(())
}
