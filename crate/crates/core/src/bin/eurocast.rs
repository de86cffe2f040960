use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use eurocast::bookmaker::{fit_consensus_abilities, load_odds, Consensus, InverseFitConfig};
use eurocast::data::{build_diff_rows, load_dataset, load_features, load_matches, write_dataset, FeatureTable, TeamRegistry};
use eurocast::ensemble::{
    baseline_report, fit_members, load_match_odds, loto_cv, permutation_importance, tune_weights, write_importance,
    write_metric_table, write_weight_grid, CombinedModel, Permutation, PipelineSpec, MEMBER_NAMES,
};
use eurocast::hist_ability::{fit_hist_abilities, HistAbilityConfig, HomeAdvantage};
use eurocast::persist::{ModelFile, ModelKind, PipelineManifest};
use eurocast::plus_minus::{build_all_segments, fit_pm_ratings, load_events, load_lineups, load_players, load_squads, team_ave_pm, PmConfig};
use eurocast::predictors::{fit_boosted, fit_forest, fit_lasso, tune_boosted, tune_forest, tune_lasso, BoostGrid, ForestParams, TrainingSet};
use eurocast::simulator::{run_tournament_mc, IntensityTable};
use eurocast::tournament::TournamentConfig;

#[derive(Parser)]
#[command(name = "eurocast", version, about = "Football tournament forecasting pipeline")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print probabilities as percentages with one decimal.
    #[arg(long, global = true)]
    percent: bool,
    /// Write a run manifest (inputs, settings, output hashes) here.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Historic abilities from international results.
    RankHist {
        #[arg(long)]
        matches: PathBuf,
        #[arg(long)]
        as_of: NaiveDate,
        /// One home effect per team instead of a shared one.
        #[arg(long)]
        per_team_home: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Abilities implied by bookmaker outright odds.
    RankBookmaker {
        #[arg(long)]
        odds: PathBuf,
        /// Tournament configuration (TOML); the 2024 format if omitted.
        #[arg(long)]
        tournament: Option<PathBuf>,
        /// `alias,team` CSV for odds team names; 2024 codes if omitted.
        #[arg(long)]
        aliases: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        sims_per_iter: u64,
        #[arg(long, default_value_t = 100_000)]
        verification_sims: u64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        /// Starting abilities are `-scale * log odds`; searched if omitted.
        #[arg(long)]
        init_scale: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average plus-minus rating of each national squad.
    RankPm {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        lineups: PathBuf,
        #[arg(long)]
        players: PathBuf,
        #[arg(long)]
        squads: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        ridge: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired covariate-difference dataset from matches and team features.
    BuildDataset {
        #[arg(long)]
        matches: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune and fit a goal model, then save it.
    Fit {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated lasso,forest,xgboost weights for `combined`.
        #[arg(long, value_parser = parse_weights)]
        weights: Option<[f64; 3]>,
        #[command(flatten)]
        tuning: TuningArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Out-of-sample metrics by cross-validation.
    Evaluate {
        #[arg(long, value_enum)]
        cv: CvArg,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_weights)]
        weights: Option<[f64; 3]>,
        /// `year,match_index,odds_win1,odds_draw,odds_win2` for a bookmaker row.
        #[arg(long)]
        match_odds: Option<PathBuf>,
        #[command(flatten)]
        tuning: TuningArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every weighting on the 0.05 simplex grid.
    TuneWeights {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        tuning: TuningArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Permutation importance of each covariate for a saved model.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo simulation of the tournament.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        tournament: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct TuningArgs {
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = eurocast::predictors::forest::DEFAULT_TREES)]
    trees: usize,
    /// Skip the mtry search and use this value.
    #[arg(long)]
    mtry: Option<usize>,
}

impl TuningArgs {
    fn spec(&self, seed: u64) -> PipelineSpec {
        PipelineSpec {
            folds: self.folds,
            forest: ForestParams {
                trees: self.trees,
                mtry: self.mtry.unwrap_or(1),
                seed,
                ..Default::default()
            },
            tune_forest: self.mtry.is_none(),
            boost_grid: BoostGrid::default(),
            seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Lasso,
    Forest,
    Xgb,
    Combined,
}

#[derive(Clone, Copy, ValueEnum)]
enum CvArg {
    Loto,
}

fn parse_weights(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("'{p}' is not a number")))
        .collect::<Result<_, _>>()?;
    let w: [f64; 3] = v.try_into().map_err(|_| "expected three comma-separated weights".to_string())?;
    eurocast::ensemble::check_weights(&w).map_err(|e| e.to_string())?;
    Ok(w)
}

/// CSV destination: a file, or stdout.
fn with_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> eurocast::Result<()>) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

struct Run {
    manifest: PipelineManifest,
    summary: serde_json::Map<String, serde_json::Value>,
}

impl Run {
    fn new(command: &str, seed: u64) -> Self {
        Run {
            manifest: PipelineManifest::new(command, seed),
            summary: serde_json::Map::new(),
        }
    }

    fn input(&mut self, p: &Path) -> anyhow::Result<()> {
        Ok(self.manifest.add_input(p)?)
    }

    fn output(&mut self, p: Option<&Path>) -> anyhow::Result<()> {
        if let Some(p) = p {
            self.manifest.add_output(p)?;
        }
        Ok(())
    }

    fn note(&mut self, key: &str, value: serde_json::Value) {
        self.summary.insert(key.to_string(), value);
    }
}

fn tournament(path: Option<&Path>, run: &mut Run) -> anyhow::Result<TournamentConfig> {
    match path {
        Some(p) => {
            run.input(p)?;
            Ok(TournamentConfig::load(p)?)
        }
        None => Ok(TournamentConfig::euro2024()),
    }
}

fn execute(cli: &Cli) -> anyhow::Result<Run> {
    let seed = cli.global.seed;
    match &cli.command {
        Command::RankHist {
            matches,
            as_of,
            per_team_home,
            out,
        } => {
            let mut run = Run::new("rank-hist", seed);
            run.input(matches)?;
            let records = load_matches(matches)?;
            let config = HistAbilityConfig {
                home_advantage: if *per_team_home { HomeAdvantage::PerTeam } else { HomeAdvantage::Shared },
                ..Default::default()
            };
            run.manifest.settings = json!({ "as_of": as_of, "config": config });
            let model = fit_hist_abilities(&records, *as_of, &config)?;
            with_output(out.as_deref(), |w| model.write_ranking_csv(w))?;
            run.output(out.as_deref())?;
            run.note("teams", json!(model.abilities.len()));
            run.note("matches_used", json!(model.matches_used));
            run.note("intercept", json!(round4(model.intercept)));
            Ok(run)
        }
        Command::RankBookmaker {
            odds,
            tournament: tpath,
            aliases,
            sims_per_iter,
            verification_sims,
            max_iter,
            init_scale,
            out,
        } => {
            let mut run = Run::new("rank-bookmaker", seed);
            let config = tournament(tpath.as_deref(), &mut run)?;
            let registry = match aliases {
                Some(p) => {
                    run.input(p)?;
                    TeamRegistry::load(p)?
                }
                None => TeamRegistry::euro2024(),
            };
            run.input(odds)?;
            let sheets = load_odds(odds, &registry)?;
            let consensus = Consensus::from_sheets(&sheets)?;
            let fit = InverseFitConfig {
                sims_per_iter: *sims_per_iter,
                verification_sims: *verification_sims,
                max_iter: *max_iter,
                init_scale: *init_scale,
                seed,
                ..Default::default()
            };
            run.manifest.settings = json!({ "inverse_fit": fit });
            let result = fit_consensus_abilities(&consensus.win_probabilities(), &config, &fit)?;
            with_output(out.as_deref(), |w| {
                let mut wtr = csv::Writer::from_writer(w);
                let err = |e: csv::Error| eurocast::Error::InvalidInput(e.to_string());
                wtr.write_record(["team", "logability", "win_prob"]).map_err(err)?;
                for i in result.ranking() {
                    wtr.write_record([
                        result.teams[i].0.clone(),
                        format!("{:.4}", result.logability[i]),
                        format!("{:.4}", result.win_prob[i]),
                    ])
                    .map_err(err)?;
                }
                wtr.flush().map_err(|e| eurocast::Error::InvalidInput(e.to_string()))
            })?;
            run.output(out.as_deref())?;
            run.note("bookmakers", json!(sheets.len()));
            run.note("margin", json!(round4(consensus.margin())));
            run.note("iterations", json!(result.loss_trace.len()));
            run.note("loss", json!(round4(result.final_loss())));
            Ok(run)
        }
        Command::RankPm {
            events,
            lineups,
            players,
            squads,
            ridge,
            out,
        } => {
            let mut run = Run::new("rank-pm", seed);
            for p in [lineups, events, players, squads] {
                run.input(p)?;
            }
            let sheets = load_lineups(lineups)?;
            let evs = load_events(events)?;
            let roster = load_players(players)?;
            let squads = load_squads(squads)?;
            let segments = build_all_segments(&sheets, &evs)?;
            let config = PmConfig {
                ridge_strength: *ridge,
                ..Default::default()
            };
            run.manifest.settings = json!({ "pm": config });
            let model = fit_pm_ratings(&segments, &roster, &config)?;
            let mut rows = Vec::new();
            for (team, squad) in &squads {
                rows.push(team_ave_pm(&model, team, squad)?);
            }
            rows.sort_by(|a, b| b.ave_pm.total_cmp(&a.ave_pm).then_with(|| a.team.cmp(&b.team)));
            with_output(out.as_deref(), |w| {
                let mut wtr = csv::Writer::from_writer(w);
                let err = |e: csv::Error| eurocast::Error::InvalidInput(e.to_string());
                wtr.write_record(["team", "ave_pm"]).map_err(err)?;
                for r in &rows {
                    wtr.write_record([r.team.clone(), format!("{:.4}", r.ave_pm)]).map_err(err)?;
                }
                wtr.flush().map_err(|e| eurocast::Error::InvalidInput(e.to_string()))
            })?;
            run.output(out.as_deref())?;
            run.note("segments", json!(segments.len()));
            run.note("players", json!(model.player_ratings.len()));
            run.note("teams", json!(rows.len()));
            Ok(run)
        }
        Command::BuildDataset { matches, features, out } => {
            let mut run = Run::new("build-dataset", seed);
            run.input(matches)?;
            run.input(features)?;
            let records = load_matches(matches)?;
            let table = FeatureTable::new(load_features(features)?);
            let rows = build_diff_rows(&records, &table)?;
            with_output(out.as_deref(), |w| write_dataset(w, &rows))?;
            run.output(out.as_deref())?;
            run.note("rows", json!(rows.len()));
            Ok(run)
        }
        Command::Fit {
            model,
            dataset,
            weights,
            tuning,
            out,
        } => {
            let mut run = Run::new("fit", seed);
            run.input(dataset)?;
            let set = TrainingSet::from_rows(&load_dataset(dataset)?);
            let spec = tuning.spec(seed);
            let (kind, combined, log) = match model {
                ModelArg::Lasso => {
                    let t = tune_lasso(&set, spec.folds, seed)?;
                    let m = fit_lasso(&set, t.best)?;
                    (ModelKind::Lasso, CombinedModel::new([1.0, 0.0, 0.0], Some(m), None, None)?, json!(t))
                }
                ModelArg::Forest => {
                    let (mtry, log) = if spec.tune_forest {
                        let t = tune_forest(&set, &spec.forest, spec.folds)?;
                        (t.best, json!(t))
                    } else {
                        (spec.forest.mtry, serde_json::Value::Null)
                    };
                    let m = fit_forest(&set, &ForestParams { mtry, ..spec.forest })?;
                    (ModelKind::Forest, CombinedModel::new([0.0, 1.0, 0.0], None, Some(m), None)?, log)
                }
                ModelArg::Xgb => {
                    let t = tune_boosted(&set, &spec.boost_grid, spec.folds, seed)?;
                    let m = fit_boosted(&set, &t.best)?;
                    (ModelKind::Xgb, CombinedModel::new([0.0, 0.0, 1.0], None, None, Some(m))?, json!(t))
                }
                ModelArg::Combined => {
                    let w = weights.ok_or_else(|| anyhow!("--weights is required for the combined model"))?;
                    let members = fit_members(&set, &spec)?;
                    (ModelKind::Combined, members.combined(w)?, json!(members.tuning))
                }
            };
            run.manifest.settings = json!({ "model": kind, "spec": spec });
            run.manifest.weights = Some(combined.weights);
            let file = ModelFile::new(kind, seed, combined, Some(log));
            file.save(out)?;
            run.manifest.add_model(out)?;
            run.note("model", json!(kind.as_str()));
            run.note("weights", json!(file.model.weights));
            run.note("rows", json!(set.len()));
            Ok(run)
        }
        Command::Evaluate {
            cv: CvArg::Loto,
            dataset,
            weights,
            match_odds,
            tuning,
            out,
        } => {
            let mut run = Run::new("evaluate", seed);
            run.input(dataset)?;
            let rows = load_dataset(dataset)?;
            let spec = tuning.spec(seed);
            run.manifest.settings = json!({ "cv": "loto", "spec": spec });
            let loto = loto_cv(&rows, &spec)?;
            let members = loto.member_reports()?;
            let mut table: Vec<(String, _)> = MEMBER_NAMES.iter().map(|n| n.to_string()).zip(members).collect();
            if let Some(w) = weights {
                run.manifest.weights = Some(*w);
                table.push(("combined".into(), loto.report(w)?));
            }
            if let Some(p) = match_odds {
                run.input(p)?;
                let odds = load_match_odds(p)?;
                table.push(("bookmaker".into(), baseline_report(&loto.held_out, &odds)?));
            }
            with_output(out.as_deref(), |w| write_metric_table(w, &table))?;
            run.output(out.as_deref())?;
            run.note("tournaments", json!(loto.folds.len()));
            run.note("matches", json!(loto.held_out.len()));
            Ok(run)
        }
        Command::TuneWeights { dataset, tuning, out } => {
            let mut run = Run::new("tune-weights", seed);
            run.input(dataset)?;
            let rows = load_dataset(dataset)?;
            let spec = tuning.spec(seed);
            run.manifest.settings = json!({ "cv": "loto", "spec": spec, "grid_step": 0.05 });
            let loto = loto_cv(&rows, &spec)?;
            let grid = tune_weights(&loto.held_out)?;
            with_output(out.as_deref(), |w| write_weight_grid(w, &grid))?;
            run.output(out.as_deref())?;
            let best = &grid[0];
            run.manifest.weights = Some(best.weights);
            run.note("grid", json!(grid.len()));
            run.note("best_weights", json!(best.weights));
            run.note("best_avg_norm", json!((best.avg_norm * 100.0).round() / 100.0));
            Ok(run)
        }
        Command::Importance {
            model,
            dataset,
            repeats,
            out,
        } => {
            let mut run = Run::new("importance", seed);
            run.manifest.add_model(model)?;
            run.input(dataset)?;
            let file = ModelFile::load(model)?;
            let set = TrainingSet::from_rows(&load_dataset(dataset)?);
            run.manifest.settings = json!({ "repeats": repeats });
            run.manifest.weights = Some(file.model.weights);
            let imp = permutation_importance(&file.model, &set, *repeats, seed, Permutation::Random)?;
            with_output(out.as_deref(), |w| write_importance(w, &imp))?;
            run.output(out.as_deref())?;
            run.note("rows", json!(set.len()));
            Ok(run)
        }
        Command::Simulate {
            model,
            features,
            tournament: tpath,
            reps,
            out,
        } => {
            let mut run = Run::new("simulate", seed);
            let config = tournament(tpath.as_deref(), &mut run)?;
            run.manifest.add_model(model)?;
            run.input(features)?;
            let file = ModelFile::load(model)?;
            let table = FeatureTable::new(load_features(features)?);
            let x = config
                .teams
                .iter()
                .map(|t| {
                    table
                        .get(config.year, t)
                        .map(|v| v.values())
                        .ok_or_else(|| eurocast::Error::MissingFeatures {
                            team: t.0.clone(),
                            year: config.year,
                        })
                })
                .collect::<eurocast::Result<Vec<_>>>()?;
            let intensities = IntensityTable::from_goal_model(&file.model, &x);
            run.manifest.settings = json!({ "replications": reps, "year": config.year });
            run.manifest.weights = Some(file.model.weights);
            let report = run_tournament_mc(&config, &intensities, *reps, seed)?;
            with_output(out.as_deref(), |w| report.write_csv(w, cli.global.percent))?;
            run.output(out.as_deref())?;
            let fav = report.ranked()[0];
            run.note("replications", json!(reps));
            run.note("favourite", json!(report.teams[fav].0));
            run.note("p_champion", json!(round4(report.probabilities(fav)[4])));
            Ok(run)
        }
    }
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<eurocast::Error>())
        .map_or(2, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = (|| -> anyhow::Result<Run> {
        if let Some(n) = cli.global.threads {
            if n == 0 {
                bail!("--threads must be positive");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the worker pool")?;
        }
        let run = execute(&cli)?;
        if let Some(p) = &cli.global.manifest {
            run.manifest.save(p)?;
        }
        Ok(run)
    })();
    match result {
        Ok(run) => {
            let mut summary = serde_json::Map::new();
            summary.insert("status".into(), json!("ok"));
            summary.insert("command".into(), json!(run.manifest.command));
            summary.insert("seed".into(), json!(run.manifest.seed));
            summary.extend(run.summary);
            eprintln!("{}", serde_json::Value::Object(summary));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
