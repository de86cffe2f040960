//! The three goal models on a synthetic tournament dataset: cross-validated
//! LASSO, random forest and gradient boosting, saved as one combined model.
//!
//! cargo run --release --example goal_models

use eurocast::data::{build_diff_rows, FeatureTable, FEATURE_NAMES};
use eurocast::ensemble::CombinedModel;
use eurocast::persist::{ModelFile, ModelKind};
use eurocast::predictors::{
    fit_boosted, fit_forest, fit_lasso, poisson_deviance, tune_boosted, tune_forest, tune_lasso, BoostGrid,
    ForestParams, GoalModel, TrainingSet,
};
use eurocast::synth;

fn main() -> anyhow::Result<()> {
    let ed = synth::editions(&[2008, 2012, 2016, 2020, 2024], &synth::team_names(24), 7);
    let rows = build_diff_rows(&ed.matches, &FeatureTable::new(ed.features))?;
    let set = TrainingSet::from_rows(&rows);
    println!("{} observations from {} matches", set.len(), set.len() / 2);

    let lt = tune_lasso(&set, 10, 1)?;
    let lasso = fit_lasso(&set, lt.best)?;
    println!("\nLASSO penalty {:.4} (max {:.4})", lt.best, lt.grid[0]);
    println!("  intercept {:+.4}", lasso.intercept);
    for (name, b) in FEATURE_NAMES.iter().zip(lasso.coefficients) {
        println!("  {name:<17} {b:+.4}");
    }

    let params = ForestParams {
        trees: 500,
        ..Default::default()
    };
    let ft = tune_forest(&set, &params, 10)?;
    let forest = fit_forest(&set, &ForestParams { mtry: ft.best, ..params })?;
    println!("\nforest: mtry {} chosen from {:?}", ft.best, ft.entries);

    let bt = tune_boosted(&set, &BoostGrid::default(), 10, 1)?;
    let boosted = fit_boosted(&set, &bt.best)?;
    println!(
        "boosting: depth {}, rounds {}, lambda {}, gamma {}",
        bt.best.max_depth, bt.best.rounds, bt.best.l2_leaf_penalty, bt.best.leaf_count_penalty
    );
    let trace = &boosted.deviance_trace;
    println!("  training deviance {:.2} -> {:.2}", trace[0], trace[trace.len() - 1]);

    let members: [(&str, &dyn GoalModel); 3] = [("lasso", &lasso), ("forest", &forest), ("xgboost", &boosted)];
    for (name, m) in members {
        println!("{name:<8} in-sample deviance {:.2}", poisson_deviance(&set.y, &m.predict_all(&set.x)));
    }

    let combined = CombinedModel::new([0.15, 0.85, 0.0], Some(lasso), Some(forest), Some(boosted))?;
    let file = ModelFile::new(ModelKind::Combined, 1, combined, None);
    let path = std::env::temp_dir().join("eurocast-combined.json");
    file.save(&path)?;
    let back = ModelFile::load(&path)?;
    println!("\nsaved and reloaded {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    println!("prediction for a zero difference: {:.4}", back.model.predict(&[0.0; 8]));
    Ok(())
}
