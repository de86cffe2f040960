//! Bookmaker consensus: outright odds to winning probabilities, and those
//! probabilities back to team abilities by inverse tournament simulation.
//!
//! Quoted odds are modelled as `quoted = odds * delta + 1` with one margin
//! `delta` shared by all teams. `odds` here are fair odds against, so a team
//! with cleaned odds `o` has probability `1 / (1 + o)`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{csv_reader, display_name, TeamId, TeamRegistry};
use crate::error::{Error, Result};
use crate::simulator::{winner_probabilities, IntensityTable};
use crate::tournament::TournamentConfig;

pub const ODDS_HEADER: [&str; 3] = ["bookmaker", "team", "quoted_odds"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsSheet {
    pub bookmaker: String,
    pub entries: BTreeMap<TeamId, f64>,
}

impl OddsSheet {
    pub fn new(bookmaker: impl Into<String>) -> Self {
        OddsSheet {
            bookmaker: bookmaker.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, team: TeamId, quoted: f64) -> Result<()> {
        if !(quoted > 1.0 && quoted.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{}: quoted odds for {team} must exceed 1, got {quoted}",
                self.bookmaker
            )));
        }
        self.entries.insert(team, quoted);
        Ok(())
    }

    /// Sum of the raw implied probabilities `1/quoted`.
    pub fn booksum(&self) -> f64 {
        self.entries.values().map(|q| 1.0 / q).sum()
    }
}

/// Fair odds from quoted odds: `(quoted - 1) / delta`.
pub fn clean_odds(quoted: f64, delta: f64) -> Result<f64> {
    if !(quoted > 1.0 && quoted.is_finite()) {
        return Err(Error::InvalidInput(format!("quoted odds must exceed 1, got {quoted}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidInput(format!("payout share must lie in (0, 1], got {delta}")));
    }
    Ok((quoted - 1.0) / delta)
}

/// Inverse of [`clean_odds`].
pub fn quote_odds(odds: f64, delta: f64) -> f64 {
    odds * delta + 1.0
}

/// `1 / (exp(l) + 1)` for log odds against `l`.
pub fn win_probability(l: f64) -> f64 {
    if l > 0.0 {
        let e = (-l).exp();
        e / (1.0 + e)
    } else {
        1.0 / (l.exp() + 1.0)
    }
}

/// Log odds against: `log((1 - p) / p)`.
pub fn log_odds_against(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

/// Payout share `delta` of one sheet: the value at which the cleaned odds
/// imply probabilities summing to one. Requires the raw implied
/// probabilities to sum to more than one.
pub fn solve_payout_share(sheet: &OddsSheet) -> Result<f64> {
    if sheet.entries.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{}: at least two teams needed to solve the margin",
            sheet.bookmaker
        )));
    }
    let booksum = sheet.booksum();
    if booksum <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "{}: implied probabilities sum to {booksum:.4}, no margin to remove",
            sheet.bookmaker
        )));
    }
    // sum_i delta / (delta + q_i - 1) increases from 0 to booksum on (0, 1].
    let total = |delta: f64| -> f64 { sheet.entries.values().map(|q| delta / (delta + q - 1.0)).sum() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median payout share over all sheets.
pub fn median_payout_share(sheets: &[OddsSheet]) -> Result<f64> {
    if sheets.is_empty() {
        return Err(Error::InvalidInput("no odds sheets".into()));
    }
    let mut deltas = sheets.iter().map(solve_payout_share).collect::<Result<Vec<_>>>()?;
    Ok(median(&mut deltas))
}

/// Per team, the mean over sheets of the log cleaned odds.
pub fn consensus_log_odds(sheets: &[OddsSheet], delta: f64) -> Result<BTreeMap<TeamId, f64>> {
    let mut acc: BTreeMap<TeamId, (f64, usize)> = BTreeMap::new();
    for sheet in sheets {
        for (team, &q) in &sheet.entries {
            let e = acc.entry(team.clone()).or_insert((0.0, 0));
            e.0 += clean_odds(q, delta)?.ln();
            e.1 += 1;
        }
    }
    if acc.is_empty() {
        return Err(Error::InvalidInput("no odds quoted".into()));
    }
    Ok(acc.into_iter().map(|(t, (s, n))| (t, s / n as f64)).collect())
}

/// Log odds of the listed teams; a team absent from every sheet is an error.
pub fn consensus_log_odds_for(sheets: &[OddsSheet], delta: f64, teams: &[TeamId]) -> Result<Vec<f64>> {
    let all = consensus_log_odds(sheets, delta)?;
    teams
        .iter()
        .map(|t| {
            all.get(t)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("team {t} is not quoted by any bookmaker")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consensus {
    pub delta: f64,
    pub per_bookmaker_delta: Vec<(String, f64)>,
    pub log_odds: BTreeMap<TeamId, f64>,
}

impl Consensus {
    pub fn from_sheets(sheets: &[OddsSheet]) -> Result<Self> {
        let per_bookmaker_delta = sheets
            .iter()
            .map(|s| Ok((s.bookmaker.clone(), solve_payout_share(s)?)))
            .collect::<Result<Vec<_>>>()?;
        let delta = median_payout_share(sheets)?;
        let log_odds = consensus_log_odds(sheets, delta)?;
        Ok(Consensus {
            delta,
            per_bookmaker_delta,
            log_odds,
        })
    }

    /// Bookmaker margin `1 - delta`.
    pub fn margin(&self) -> f64 {
        1.0 - self.delta
    }

    pub fn win_probabilities(&self) -> BTreeMap<TeamId, f64> {
        self.log_odds.iter().map(|(t, l)| (t.clone(), win_probability(*l))).collect()
    }
}

pub fn load_odds(path: &Path, registry: &TeamRegistry) -> Result<Vec<OddsSheet>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_odds(file, &display_name(path), registry)
}

/// Reads `bookmaker,team,quoted_odds` rows into one sheet per bookmaker, in
/// order of first appearance.
pub fn read_odds<R: Read>(input: R, name: &str, registry: &TeamRegistry) -> Result<Vec<OddsSheet>> {
    let mut rdr = csv_reader(input, name, &ODDS_HEADER)?;
    let mut sheets: Vec<OddsSheet> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(name, row, e.to_string()))?;
        let bookmaker = rec[0].to_string();
        let team = registry.resolve(&rec[1]);
        let quoted: f64 = rec[2]
            .parse()
            .map_err(|_| Error::row(name, row, format!("quoted_odds: cannot parse '{}'", &rec[2])))?;
        if !(quoted > 1.0 && quoted.is_finite()) {
            return Err(Error::row(name, row, format!("quoted odds must exceed 1, got {quoted}")));
        }
        let pos = match sheets.iter().position(|s| s.bookmaker == bookmaker) {
            Some(p) => p,
            None => {
                sheets.push(OddsSheet::new(bookmaker));
                sheets.len() - 1
            }
        };
        if sheets[pos].entries.insert(team.clone(), quoted).is_some() {
            return Err(Error::row(name, row, format!("duplicate odds for {team}")));
        }
    }
    Ok(sheets)
}

pub fn write_odds<W: Write>(out: W, sheets: &[OddsSheet]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(ODDS_HEADER).map_err(err)?;
    for s in sheets {
        for (team, q) in &s.entries {
            wtr.write_record([s.bookmaker.as_str(), team.as_str(), &q.to_string()])
                .map_err(err)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<output>", e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseFitConfig {
    pub sims_per_iter: u64,
    /// Simulations of the independent check after the loop; 0 skips it.
    pub verification_sims: u64,
    pub max_iter: usize,
    /// Stop once the RMSE between simulated and target log odds is below.
    pub tolerance: f64,
    pub offset: f64,
    pub step: f64,
    pub step_decay: f64,
    /// Starting abilities are `-init_scale * l`, centered. `None` picks the
    /// scale from [`INIT_SCALES`] with the smallest simulated loss.
    pub init_scale: Option<f64>,
    pub seed: u64,
}

impl Default for InverseFitConfig {
    fn default() -> Self {
        InverseFitConfig {
            sims_per_iter: 10_000,
            verification_sims: 100_000,
            max_iter: 500,
            tolerance: 0.05,
            offset: 0.15,
            step: 0.01,
            step_decay: 0.1,
            init_scale: None,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsensusAbilities {
    pub teams: Vec<TeamId>,
    /// Target log odds against.
    pub log_odds: Vec<f64>,
    pub win_prob: Vec<f64>,
    /// Centered abilities.
    pub logability: Vec<f64>,
    pub offset: f64,
    pub loss_trace: Vec<f64>,
    /// Simulated title probabilities of the final abilities, from the
    /// verification run (empty when skipped).
    pub simulated_prob: Vec<f64>,
    pub verification_rmse: Option<f64>,
}

impl ConsensusAbilities {
    pub fn logability_of(&self, team: &TeamId) -> Option<f64> {
        self.teams.iter().position(|t| t == team).map(|i| self.logability[i])
    }

    pub fn final_loss(&self) -> f64 {
        self.loss_trace.last().copied().unwrap_or(f64::NAN)
    }

    /// Team indices by descending ability.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.teams.len()).collect();
        idx.sort_by(|&a, &b| {
            self.logability[b]
                .total_cmp(&self.logability[a])
                .then_with(|| self.teams[a].cmp(&self.teams[b]))
        });
        idx
    }
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (ss / a.len() as f64).sqrt()
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

pub const INIT_SCALES: [f64; 8] = [0.025, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.5];

/// Smallest probability turned into log odds; guards teams that never
/// reach the knockout stage in a finite simulation.
const PROB_FLOOR: f64 = 1e-9;

fn simulated_log_odds(
    config: &TournamentConfig,
    abilities: &[f64],
    offset: f64,
    sims: u64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let table = IntensityTable::from_abilities(abilities, offset);
    let probs = winner_probabilities(config, &table, sims, seed)?;
    let l = probs
        .iter()
        .map(|p| log_odds_against(p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)))
        .collect();
    Ok((probs, l))
}

/// Abilities whose simulated title probabilities match `probs`.
///
/// Each iteration simulates the tournament from the current abilities
/// (intercept `offset`, no home effect), computes the RMSE between the
/// simulated and target log odds, stops below the tolerance, and otherwise
/// moves every ability by `step * iter^-step_decay` towards closing its own
/// gap. Every iteration reuses the same random streams.
pub fn fit_consensus_abilities(
    probs: &BTreeMap<TeamId, f64>,
    config: &TournamentConfig,
    fit: &InverseFitConfig,
) -> Result<ConsensusAbilities> {
    if fit.sims_per_iter == 0 || fit.max_iter == 0 {
        return Err(Error::InvalidInput("sims_per_iter and max_iter must be positive".into()));
    }
    let teams = config.teams.clone();
    let win_prob: Vec<f64> = teams
        .iter()
        .map(|t| match probs.get(t) {
            Some(&p) if p > 0.0 && p < 1.0 => Ok(p),
            Some(&p) => Err(Error::InvalidInput(format!("probability for {t} must lie in (0, 1), got {p}"))),
            None => Err(Error::InvalidInput(format!("no probability for {t}"))),
        })
        .collect::<Result<_>>()?;
    let target: Vec<f64> = win_prob.iter().map(|&p| log_odds_against(p)).collect();

    let start = |scale: f64| {
        let mut a: Vec<f64> = target.iter().map(|l| -scale * l).collect();
        center(&mut a);
        a
    };
    let mut abilities = match fit.init_scale {
        Some(scale) => start(scale),
        None => {
            let mut best = (f64::INFINITY, Vec::new());
            for scale in INIT_SCALES {
                let a = start(scale);
                let (_, sim_l) = simulated_log_odds(config, &a, fit.offset, fit.sims_per_iter, fit.seed)?;
                let loss = rmse(&sim_l, &target);
                if loss < best.0 {
                    best = (loss, a);
                }
            }
            best.1
        }
    };

    let mut trace = Vec::new();
    let mut converged = false;
    for iter in 1..=fit.max_iter {
        let (_, sim_l) = simulated_log_odds(config, &abilities, fit.offset, fit.sims_per_iter, fit.seed)?;
        let loss = rmse(&sim_l, &target);
        trace.push(loss);
        if loss < fit.tolerance {
            converged = true;
            break;
        }
        let step = fit.step * (iter as f64).powf(-fit.step_decay);
        for ((a, s), t) in abilities.iter_mut().zip(&sim_l).zip(&target) {
            // Simulated odds against too long: the team is too weak.
            let gap = s - t;
            if gap != 0.0 {
                *a += step * gap.signum();
            }
        }
        center(&mut abilities);
    }
    if !converged {
        return Err(Error::LossNotReached {
            what: "inverse tournament simulation",
            tolerance: fit.tolerance,
            trace,
        });
    }

    let (simulated_prob, verification_rmse) = if fit.verification_sims > 0 {
        let seed = fit.seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let (p, l) = simulated_log_odds(config, &abilities, fit.offset, fit.verification_sims, seed)?;
        (p, Some(rmse(&l, &target)))
    } else {
        (Vec::new(), None)
    };

    Ok(ConsensusAbilities {
        teams,
        log_odds: target,
        win_prob,
        logability: abilities,
        offset: fit.offset,
        loss_trace: trace,
        simulated_prob,
        verification_rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_and_quote_invert() {
        assert!((clean_odds(3.25, 0.85).unwrap() - 2.25 / 0.85).abs() < 1e-15);
        for &d in &[0.1, 0.5, 0.8325, 0.99] {
            for &x in &[0.01, 1.0, 7.5, 300.0] {
                assert!((clean_odds(quote_odds(x, d), d).unwrap() - x).abs() < 1e-12 * x.max(1.0));
            }
        }
        assert!(clean_odds(1.0, 0.8).is_err());
        assert!(clean_odds(2.0, 0.0).is_err());
        assert!((clean_odds(2.0, 1.0 - 1e-12).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn win_probability_values() {
        assert_eq!(win_probability(0.0), 0.5);
        assert!((win_probability(3f64.ln()) - 0.25).abs() < 1e-15);
        assert!(win_probability(800.0) < 1e-300);
        assert!((log_odds_against(win_probability(1.7)) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn log_odds_average() {
        let mut a = OddsSheet::new("a");
        a.insert(TeamId::new("X"), quote_odds(1f64.exp(), 0.8)).unwrap();
        let mut b = OddsSheet::new("b");
        b.insert(TeamId::new("X"), quote_odds(3f64.exp(), 0.8)).unwrap();
        let l = consensus_log_odds(&[a.clone(), b], 0.8).unwrap();
        assert!((l[&TeamId::new("X")] - 2.0).abs() < 1e-12);
        let single = consensus_log_odds(&[a], 0.8).unwrap();
        assert!((single[&TeamId::new("X")] - 1.0).abs() < 1e-12);
        assert!(consensus_log_odds_for(&[], 0.8, &[TeamId::new("X")]).is_err());
    }

    #[test]
    fn solved_share_makes_fair_book() {
        let mut s = OddsSheet::new("b");
        for (i, q) in [2.5, 3.0, 4.0, 9.0, 15.0].iter().enumerate() {
            s.insert(TeamId::new(format!("T{i}")), *q).unwrap();
        }
        let d = solve_payout_share(&s).unwrap();
        assert!(d > 0.0 && d < 1.0);
        let total: f64 = s
            .entries
            .values()
            .map(|q| win_probability(clean_odds(*q, d).unwrap().ln()))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);

        let mut fair = OddsSheet::new("fair");
        fair.insert(TeamId::new("A"), 2.0).unwrap();
        fair.insert(TeamId::new("B"), 2.0).unwrap();
        assert!(solve_payout_share(&fair).is_err());
    }

    #[test]
    fn odds_rows_validated() {
        let reg = TeamRegistry::euro2024();
        let ok = "bookmaker,team,quoted_odds\nx,FRA,4.5\nx,ENG,4.0\ny,FRA,5\n";
        let sheets = read_odds(ok.as_bytes(), "odds", &reg).unwrap();
        assert_eq!(sheets.len(), 2);
        assert_eq!(sheets[0].entries[&TeamId::new("France")], 4.5);
        let bad = "bookmaker,team,quoted_odds\nx,FRA,4.5\nx,ENG,1.0\n";
        match read_odds(bad.as_bytes(), "odds", &reg).unwrap_err() {
            Error::Row { row, .. } => assert_eq!(row, 2),
            e => panic!("{e:?}"),
        }
        let dup = "bookmaker,team,quoted_odds\nx,FRA,4.5\nx,France,4.0\n";
        assert!(read_odds(dup.as_bytes(), "odds", &reg).is_err());
    }

    #[test]
    fn identical_probabilities_give_zero_abilities() {
        let cfg = TournamentConfig::euro2024();
        let probs = cfg.teams.iter().map(|t| (t.clone(), 1.0 / 24.0)).collect();
        let fit = InverseFitConfig {
            sims_per_iter: 2_000,
            verification_sims: 0,
            tolerance: 0.2,
            ..Default::default()
        };
        let res = fit_consensus_abilities(&probs, &cfg, &fit).unwrap();
        assert!(res.logability.iter().all(|a| a.abs() < 0.05), "{:?}", res.logability);
        assert!(res.logability.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn unreachable_tolerance_reports_trace() {
        let cfg = TournamentConfig::euro2024();
        let probs = cfg
            .teams
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), if i == 0 { 0.9 } else { 0.1 / 23.0 }))
            .collect();
        let fit = InverseFitConfig {
            sims_per_iter: 200,
            max_iter: 3,
            verification_sims: 0,
            ..Default::default()
        };
        match fit_consensus_abilities(&probs, &cfg, &fit).unwrap_err() {
            Error::LossNotReached { trace, .. } => assert_eq!(trace.len(), 3),
            e => panic!("{e:?}"),
        }
    }
}
