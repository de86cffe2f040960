use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use eurocast::data::{write_features, write_matches};
use eurocast::persist::{ModelFile, PipelineManifest};
use eurocast::synth;
use eurocast::tournament::TournamentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eurocast"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn inputs() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let config = TournamentConfig::euro2024();
    let ed = synth::editions(&[2012, 2016, 2020, 2024], &config.teams, 5);
    let as_of = NaiveDate::from_ymd_opt(2024, 6, 13).unwrap();
    let past: Vec<_> = ed.matches.iter().filter(|m| m.date < as_of).cloned().collect();
    write_matches(File::create(dir.path().join("matches.csv")).unwrap(), &past).unwrap();
    write_features(File::create(dir.path().join("features.csv")).unwrap(), &ed.features).unwrap();
    let history = synth::history(&synth::spaced_abilities(&config.teams, 0.05), 0.1, 0.3, 2000, as_of, 8.0, 3);
    write_matches(File::create(dir.path().join("history.csv")).unwrap(), &history).unwrap();
    dir
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn pipeline_outputs_and_reruns_identically() {
    let dir = inputs();
    let d = dir.path();
    ok(d, &["build-dataset", "--matches", "matches.csv", "--features", "features.csv", "--out", "dataset.csv"]);
    let fit = [
        "fit", "--model", "combined", "--weights", "0.15,0.85,0", "--dataset", "dataset.csv", "--trees", "60", "--folds",
        "3", "--out", "combined.json", "--manifest", "fit.json", "--seed", "7",
    ];
    ok(d, &fit);
    let manifest = PipelineManifest::load(&d.join("fit.json")).unwrap();
    assert_eq!(manifest.weights, Some([0.15, 0.85, 0.0]));
    assert_eq!(manifest.seed, 7);
    assert_eq!(manifest.models.len(), 1);
    let model = ModelFile::load(&d.join("combined.json")).unwrap();
    assert_eq!(model.model.weights, [0.15, 0.85, 0.0]);

    let first_fit = read(d.join("combined.json"));
    ok(d, &fit);
    assert_eq!(first_fit, read(d.join("combined.json")));
    assert_eq!(manifest, PipelineManifest::load(&d.join("fit.json")).unwrap());

    let sim = |out: &str, manifest: &str, threads: &str| {
        ok(
            d,
            &[
                "simulate", "--model", "combined.json", "--features", "features.csv", "--reps", "3000", "--seed", "11",
                "--threads", threads, "--out", out, "--manifest", manifest,
            ],
        )
    };
    let o = sim("sim1.csv", "sim1.json", "1");
    let summary = String::from_utf8_lossy(&o.stderr);
    let line: serde_json::Value = serde_json::from_str(summary.trim()).unwrap();
    assert_eq!(line["status"], "ok");
    assert_eq!(line["seed"], 11);
    sim("sim2.csv", "sim2.json", "3");
    let csv = read(d.join("sim1.csv"));
    assert_eq!(csv, read(d.join("sim2.csv")));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "team,p_r16,p_qf,p_sf,p_final,p_champion");
    assert_eq!(lines.len(), 25);
    for l in &lines[1..] {
        let cells: Vec<&str> = l.split(',').collect();
        assert_eq!(cells.len(), 6);
        assert!(cells[1..].iter().all(|c| c.len() == 6 && c.parse::<f64>().is_ok()), "{l}");
    }
    let m1 = PipelineManifest::load(&d.join("sim1.json")).unwrap();
    let m2 = PipelineManifest::load(&d.join("sim2.json")).unwrap();
    assert_eq!(m1.outputs[0].sha256, m2.outputs[0].sha256);
    assert_eq!(m1.inputs, m2.inputs);

    ok(d, &["--percent", "simulate", "--model", "combined.json", "--features", "features.csv", "--reps", "500", "--out", "pct.csv"]);
    let pct = read(d.join("pct.csv"));
    let champ: f64 = pct.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((champ - 100.0).abs() < 1.5);

    ok(d, &["importance", "--model", "combined.json", "--dataset", "dataset.csv", "--repeats", "2", "--out", "imp.csv"]);
    assert_eq!(read(d.join("imp.csv")).lines().count(), 9);
}

#[test]
fn tune_weights_writes_the_full_grid() {
    let dir = inputs();
    let d = dir.path();
    ok(d, &["build-dataset", "--matches", "matches.csv", "--features", "features.csv", "--out", "dataset.csv"]);
    ok(d, &["tune-weights", "--dataset", "dataset.csv", "--trees", "30", "--folds", "3", "--mtry", "2", "--out", "grid.csv"]);
    let grid = read(d.join("grid.csv"));
    let rows: Vec<Vec<f64>> = grid
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 231);
    for w in rows.windows(2) {
        assert!(w[0][9] >= w[1][9]);
    }
    assert!(rows.iter().any(|r| r[6] == 100.0));

    ok(d, &["evaluate", "--cv", "loto", "--dataset", "dataset.csv", "--trees", "30", "--folds", "3", "--mtry", "2", "--weights", "0.2,0.8,0", "--out", "eval.csv"]);
    let eval = read(d.join("eval.csv"));
    assert!(eval.starts_with("model,ml,cr,rps,mae_goals,mae_goaldiff\n"));
    assert_eq!(eval.lines().count(), 5);
}

#[test]
fn rank_hist_is_reproducible() {
    let dir = inputs();
    let d = dir.path();
    let a = ok(d, &["rank-hist", "--matches", "history.csv", "--as-of", "2024-06-13"]);
    let b = ok(d, &["rank-hist", "--matches", "history.csv", "--as-of", "2024-06-13"]);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("team,ability\nGermany,"));
    assert_eq!(text.lines().count(), 25);
}

#[test]
fn exit_codes() {
    let dir = inputs();
    let d = dir.path();
    assert_eq!(run(d, &["rank-hist", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(d, &["frobnicate"]).status.code(), Some(1));
    let missing = run(d, &["rank-hist", "--matches", "nope.csv", "--as-of", "2024-06-13"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.csv"));
    let schema = run(d, &["build-dataset", "--matches", "features.csv", "--features", "features.csv"]);
    assert_eq!(schema.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&schema.stderr).contains("expected header"));
    assert_eq!(
        run(d, &["fit", "--model", "combined", "--weights", "0.5,0.6,0", "--dataset", "x.csv", "--out", "m.json"]).status.code(),
        Some(1)
    );

    std::fs::write(d.join("future.json"), r#"{"format_version": 99}"#).unwrap();
    let newer = run(d, &["simulate", "--model", "future.json", "--features", "features.csv", "--reps", "10"]);
    assert_eq!(newer.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&newer.stderr).contains("newer"));
}
