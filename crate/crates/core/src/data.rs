//! Domain types, CSV ingestion and the paired feature-difference dataset.
//!
//! Every match is turned into two observations, one per team, whose
//! covariate vectors are the team's covariates minus its opponent's. The
//! two difference vectors of a match are exact negations of each other.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_FEATURES: usize = 8;

/// Column order of every feature vector and difference vector.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "gdp_log",
    "market_value_log",
    "fifa_rank",
    "uefa_points",
    "cl_players",
    "hist_ability",
    "logability",
    "ave_pm",
];

pub type FeatureVec = [f64; N_FEATURES];

/// Case-sensitive team key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TeamId(pub String);

impl TeamId {
    pub fn new(name: impl Into<String>) -> Self {
        TeamId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TeamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

impl From<&str> for TeamId {
    fn from(s: &str) -> Self {
        TeamId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchType {
    WorldCup,
    ConfederationTournament,
    /// World Cup and confederation qualifiers share one class.
    Qualifier,
    FriendlyOther,
}

impl MatchType {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchType::WorldCup => "world_cup",
            MatchType::ConfederationTournament => "confederation_tournament",
            MatchType::Qualifier => "qualifier",
            MatchType::FriendlyOther => "friendly_other",
        }
    }
}

impl FromStr for MatchType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "world_cup" | "worldcup" => Ok(MatchType::WorldCup),
            "confederation_tournament" | "confederation" | "continental" => {
                Ok(MatchType::ConfederationTournament)
            }
            "qualifier" | "qualification" => Ok(MatchType::Qualifier),
            "friendly_other" | "friendly" | "other" => Ok(MatchType::FriendlyOther),
            other => Err(format!("unknown match_type '{other}'")),
        }
    }
}

impl fmt::Display for MatchType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One international match with its 90-minute score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub date: NaiveDate,
    pub home_team: TeamId,
    pub away_team: TeamId,
    pub goals_home: u32,
    pub goals_away: u32,
    pub venue_country: String,
    pub neutral: bool,
    pub match_type: MatchType,
}

/// The eight covariates of one team at one tournament edition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamFeatureVector {
    pub tournament_year: i32,
    pub team: TeamId,
    pub gdp_log: f64,
    pub market_value_log: f64,
    pub fifa_rank: u32,
    pub uefa_points: f64,
    pub cl_players: f64,
    pub hist_ability: f64,
    pub logability: f64,
    pub ave_pm: f64,
}

impl TeamFeatureVector {
    /// Covariates in [`FEATURE_NAMES`] order.
    pub fn values(&self) -> FeatureVec {
        [
            self.gdp_log,
            self.market_value_log,
            self.fifa_rank as f64,
            self.uefa_points,
            self.cl_players,
            self.hist_ability,
            self.logability,
            self.ave_pm,
        ]
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.fifa_rank < 1 {
            return Err("fifa_rank must be >= 1".into());
        }
        if !(self.cl_players >= 0.0) {
            return Err("cl_players must be >= 0".into());
        }
        if self.values().iter().any(|v| !v.is_finite()) {
            return Err("covariates must be finite".into());
        }
        Ok(())
    }
}

/// Feature vectors indexed by (tournament year, team).
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    entries: BTreeMap<(i32, TeamId), TeamFeatureVector>,
}

impl FeatureTable {
    pub fn new(vectors: impl IntoIterator<Item = TeamFeatureVector>) -> Self {
        let entries = vectors
            .into_iter()
            .map(|v| ((v.tournament_year, v.team.clone()), v))
            .collect();
        FeatureTable { entries }
    }

    pub fn get(&self, year: i32, team: &TeamId) -> Option<&TeamFeatureVector> {
        self.entries.get(&(year, team.clone()))
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.entries.keys().map(|(y, _)| *y).collect()
    }

    pub fn teams_in(&self, year: i32) -> Vec<&TeamFeatureVector> {
        self.entries
            .values()
            .filter(|v| v.tournament_year == year)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TeamFeatureVector> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tournament edition a match belongs to: the latest year in the table
    /// that is not after the match's calendar year. A tournament postponed
    /// into the following calendar year therefore keeps its edition label.
    pub fn edition_for(&self, date: NaiveDate) -> Option<i32> {
        self.years().into_iter().filter(|y| *y <= date.year()).max()
    }
}

/// One observation of the goal-model dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDiffRow {
    pub year: i32,
    /// Index of the source match; both rows of a match share it.
    pub match_index: usize,
    pub goals: u32,
    pub team: TeamId,
    pub opponent: TeamId,
    pub diff: FeatureVec,
}

/// Maps display names and flag codes to canonical team keys.
#[derive(Debug, Clone, Default)]
pub struct TeamRegistry {
    aliases: HashMap<String, TeamId>,
}

impl TeamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alias: impl Into<String>, team: TeamId) {
        self.aliases.insert(alias.into(), team);
    }

    /// Unknown names resolve to themselves.
    pub fn resolve(&self, name: &str) -> TeamId {
        self.aliases
            .get(name)
            .cloned()
            .unwrap_or_else(|| TeamId::new(name))
    }

    /// Three-letter codes of the 2024 participants.
    pub fn euro2024() -> Self {
        const CODES: [(&str, &str); 24] = [
            ("GER", "Germany"),
            ("SCO", "Scotland"),
            ("HUN", "Hungary"),
            ("SUI", "Switzerland"),
            ("ESP", "Spain"),
            ("CRO", "Croatia"),
            ("ITA", "Italy"),
            ("ALB", "Albania"),
            ("SVN", "Slovenia"),
            ("DEN", "Denmark"),
            ("SRB", "Serbia"),
            ("ENG", "England"),
            ("POL", "Poland"),
            ("NED", "Netherlands"),
            ("AUT", "Austria"),
            ("FRA", "France"),
            ("BEL", "Belgium"),
            ("SVK", "Slovakia"),
            ("ROU", "Romania"),
            ("UKR", "Ukraine"),
            ("TUR", "Turkey"),
            ("GEO", "Georgia"),
            ("POR", "Portugal"),
            ("CZE", "Czech Republic"),
        ];
        let mut reg = TeamRegistry::new();
        for (code, name) in CODES {
            reg.insert(code, TeamId::new(name));
        }
        reg
    }

    /// Reads `alias,team` rows.
    pub fn load(path: &Path) -> Result<Self> {
        let name = display_name(path);
        let mut rdr = open_csv(path, &["alias", "team"])?;
        let mut reg = TeamRegistry::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::row(&name, i + 1, e.to_string()))?;
            reg.insert(rec[0].trim(), TeamId::new(rec[1].trim()));
        }
        Ok(reg)
    }
}

// ---------------------------------------------------------------------------
// CSV plumbing

pub fn display_name(path: &Path) -> String {
    path.display().to_string()
}

pub(crate) fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv_reader(file, &display_name(path), header)
}

pub(crate) fn csv_reader<R: Read>(
    input: R,
    name: &str,
    header: &[&str],
) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let found = rdr
        .headers()
        .map_err(|e| Error::Schema {
            file: name.to_string(),
            message: e.to_string(),
        })?
        .clone();
    let found: Vec<&str> = found.iter().collect();
    if found != header {
        return Err(Error::Schema {
            file: name.to_string(),
            message: format!(
                "expected header '{}', found '{}'",
                header.join(","),
                found.join(",")
            ),
        });
    }
    Ok(rdr)
}

pub(crate) fn create_file(path: &Path) -> Result<std::fs::File> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, idx: usize, col: &str) -> std::result::Result<T, String> {
    let raw = rec.get(idx).unwrap_or("");
    if raw.is_empty() {
        return Err(format!("missing value for {col}"));
    }
    raw.parse::<T>()
        .map_err(|_| format!("cannot parse {col} value '{raw}'"))
}

fn parse_goals(rec: &csv::StringRecord, idx: usize, col: &str) -> std::result::Result<u32, String> {
    let g: i64 = parse_field(rec, idx, col)?;
    if g < 0 {
        return Err(format!("{col} must be non-negative, got {g}"));
    }
    u32::try_from(g).map_err(|_| format!("{col} out of range"))
}

pub(crate) fn parse_bool(raw: &str) -> std::result::Result<bool, String> {
    match raw.to_ascii_lowercase().as_str() {
        "yes" | "true" | "1" => Ok(true),
        "no" | "false" | "0" => Ok(false),
        other => Err(format!("cannot parse neutral value '{other}'")),
    }
}

// ---------------------------------------------------------------------------
// matches.csv

pub const MATCHES_HEADER: [&str; 8] = [
    "date",
    "home",
    "away",
    "goals_home",
    "goals_away",
    "country",
    "neutral",
    "match_type",
];

pub fn load_matches(path: &Path) -> Result<Vec<MatchRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_matches(file, &display_name(path))
}

/// Parses a matches CSV. Any bad row fails the whole load.
pub fn read_matches<R: Read>(input: R, name: &str) -> Result<Vec<MatchRecord>> {
    let mut rdr = csv_reader(input, name, &MATCHES_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(name, row, e.to_string()))?;
        let parsed = (|| -> std::result::Result<MatchRecord, String> {
            let date_raw = rec.get(0).unwrap_or("");
            let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d")
                .map_err(|_| format!("malformed date '{date_raw}'"))?;
            Ok(MatchRecord {
                date,
                home_team: TeamId::new(&rec[1]),
                away_team: TeamId::new(&rec[2]),
                goals_home: parse_goals(&rec, 3, "goals_home")?,
                goals_away: parse_goals(&rec, 4, "goals_away")?,
                venue_country: rec[5].to_string(),
                neutral: parse_bool(&rec[6])?,
                match_type: rec[7].parse()?,
            })
        })();
        out.push(parsed.map_err(|m| Error::row(name, row, m))?);
    }
    Ok(out)
}

pub fn write_matches<W: Write>(out: W, matches: &[MatchRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(MATCHES_HEADER).map_err(io)?;
    for m in matches {
        wtr.write_record([
            m.date.format("%Y-%m-%d").to_string(),
            m.home_team.0.clone(),
            m.away_team.0.clone(),
            m.goals_home.to_string(),
            m.goals_away.to_string(),
            m.venue_country.clone(),
            if m.neutral { "yes" } else { "no" }.to_string(),
            m.match_type.as_str().to_string(),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("<output>", e))
}

// ---------------------------------------------------------------------------
// features.csv

pub const FEATURES_HEADER: [&str; 10] = [
    "year",
    "team",
    "gdp_log",
    "market_value_log",
    "fifa_rank",
    "uefa_points",
    "cl_players",
    "hist_ability",
    "logability",
    "ave_pm",
];

pub fn load_features(path: &Path) -> Result<Vec<TeamFeatureVector>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(file, &display_name(path))
}

/// Incomplete rows are rejected; nothing is imputed.
pub fn read_features<R: Read>(input: R, name: &str) -> Result<Vec<TeamFeatureVector>> {
    let mut rdr = csv_reader(input, name, &FEATURES_HEADER)?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(name, row, e.to_string()))?;
        let parsed = (|| -> std::result::Result<TeamFeatureVector, String> {
            let v = TeamFeatureVector {
                tournament_year: parse_field(&rec, 0, "year")?,
                team: TeamId::new(&rec[1]),
                gdp_log: parse_field(&rec, 2, "gdp_log")?,
                market_value_log: parse_field(&rec, 3, "market_value_log")?,
                fifa_rank: parse_field(&rec, 4, "fifa_rank")?,
                uefa_points: parse_field(&rec, 5, "uefa_points")?,
                cl_players: parse_field(&rec, 6, "cl_players")?,
                hist_ability: parse_field(&rec, 7, "hist_ability")?,
                logability: parse_field(&rec, 8, "logability")?,
                ave_pm: parse_field(&rec, 9, "ave_pm")?,
            };
            v.validate()?;
            Ok(v)
        })();
        let v = parsed.map_err(|m| Error::row(name, row, m))?;
        if !seen.insert((v.tournament_year, v.team.clone())) {
            return Err(Error::row(
                name,
                row,
                format!("duplicate entry for {} {}", v.team, v.tournament_year),
            ));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_features<W: Write>(out: W, features: &[TeamFeatureVector]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(FEATURES_HEADER).map_err(io)?;
    for f in features {
        wtr.write_record([
            f.tournament_year.to_string(),
            f.team.0.clone(),
            f.gdp_log.to_string(),
            f.market_value_log.to_string(),
            f.fifa_rank.to_string(),
            f.uefa_points.to_string(),
            f.cl_players.to_string(),
            f.hist_ability.to_string(),
            f.logability.to_string(),
            f.ave_pm.to_string(),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("<output>", e))
}

// ---------------------------------------------------------------------------
// feature-difference rows

/// Two rows per match, edition resolved with [`FeatureTable::edition_for`].
pub fn build_diff_rows(matches: &[MatchRecord], features: &FeatureTable) -> Result<Vec<FeatureDiffRow>> {
    let mut rows = Vec::with_capacity(2 * matches.len());
    for (idx, m) in matches.iter().enumerate() {
        let year = features.edition_for(m.date).ok_or_else(|| Error::MissingFeatures {
            team: m.home_team.0.clone(),
            year: m.date.year(),
        })?;
        push_match_rows(&mut rows, idx, year, m, features)?;
    }
    Ok(rows)
}

/// Like [`build_diff_rows`] with every match assigned to `year`.
pub fn build_diff_rows_for_year(
    matches: &[MatchRecord],
    year: i32,
    features: &FeatureTable,
) -> Result<Vec<FeatureDiffRow>> {
    let mut rows = Vec::with_capacity(2 * matches.len());
    for (idx, m) in matches.iter().enumerate() {
        push_match_rows(&mut rows, idx, year, m, features)?;
    }
    Ok(rows)
}

fn push_match_rows(
    rows: &mut Vec<FeatureDiffRow>,
    idx: usize,
    year: i32,
    m: &MatchRecord,
    features: &FeatureTable,
) -> Result<()> {
    let lookup = |team: &TeamId| {
        features.get(year, team).ok_or_else(|| Error::MissingFeatures {
            team: team.0.clone(),
            year,
        })
    };
    let home = lookup(&m.home_team)?.values();
    let away = lookup(&m.away_team)?.values();
    let diff = feature_diff(&home, &away);
    rows.push(FeatureDiffRow {
        year,
        match_index: idx,
        goals: m.goals_home,
        team: m.home_team.clone(),
        opponent: m.away_team.clone(),
        diff,
    });
    rows.push(FeatureDiffRow {
        year,
        match_index: idx,
        goals: m.goals_away,
        team: m.away_team.clone(),
        opponent: m.home_team.clone(),
        diff: negate(&diff),
    });
    Ok(())
}

pub fn feature_diff(team: &FeatureVec, opponent: &FeatureVec) -> FeatureVec {
    std::array::from_fn(|k| team[k] - opponent[k])
}

pub fn negate(v: &FeatureVec) -> FeatureVec {
    std::array::from_fn(|k| -v[k])
}

/// Consecutive row pairs belonging to the same match.
pub fn match_pairs(rows: &[FeatureDiffRow]) -> Result<Vec<(&FeatureDiffRow, &FeatureDiffRow)>> {
    if rows.len() % 2 != 0 {
        return Err(Error::InvalidInput("odd number of dataset rows".into()));
    }
    rows.chunks(2)
        .map(|c| {
            if c[0].match_index != c[1].match_index || c[0].year != c[1].year {
                Err(Error::InvalidInput(format!(
                    "rows for match {} are not adjacent",
                    c[0].match_index
                )))
            } else {
                Ok((&c[0], &c[1]))
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// dataset.csv (output of build-dataset)

pub fn dataset_header() -> Vec<&'static str> {
    let mut h = vec!["year", "match", "team", "opponent", "goals"];
    h.extend(FEATURE_NAMES);
    h
}

pub fn write_dataset<W: Write>(out: W, rows: &[FeatureDiffRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(dataset_header()).map_err(io)?;
    for r in rows {
        let mut rec = vec![
            r.year.to_string(),
            r.match_index.to_string(),
            r.team.0.clone(),
            r.opponent.0.clone(),
            r.goals.to_string(),
        ];
        rec.extend(r.diff.iter().map(|v| v.to_string()));
        wtr.write_record(&rec).map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("<output>", e))
}

pub fn load_dataset(path: &Path) -> Result<Vec<FeatureDiffRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, &display_name(path))
}

pub fn read_dataset<R: Read>(input: R, name: &str) -> Result<Vec<FeatureDiffRow>> {
    let header = dataset_header();
    let mut rdr = csv_reader(input, name, &header)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(name, row, e.to_string()))?;
        let parsed = (|| -> std::result::Result<FeatureDiffRow, String> {
            let mut diff = [0.0; N_FEATURES];
            for (k, d) in diff.iter_mut().enumerate() {
                *d = parse_field(&rec, 5 + k, FEATURE_NAMES[k])?;
            }
            Ok(FeatureDiffRow {
                year: parse_field(&rec, 0, "year")?,
                match_index: parse_field(&rec, 1, "match")?,
                team: TeamId::new(&rec[2]),
                opponent: TeamId::new(&rec[3]),
                goals: parse_goals(&rec, 4, "goals")?,
                diff,
            })
        })();
        out.push(parsed.map_err(|m| Error::row(name, row, m))?);
    }
    match_pairs(&out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "date,home,away,goals_home,goals_away,country,neutral,match_type\n";

    #[test]
    fn parses_table_row() {
        let csv = format!("{HEADER}2021-06-02,England,Austria,1,0,England,no,friendly\n");
        let m = read_matches(csv.as_bytes(), "m.csv").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].home_team, TeamId::from("England"));
        assert_eq!(m[0].goals_home, 1);
        assert!(!m[0].neutral);
        assert_eq!(m[0].match_type, MatchType::FriendlyOther);
    }

    #[test]
    fn empty_file_gives_no_matches() {
        assert!(read_matches(HEADER.as_bytes(), "m.csv").unwrap().is_empty());
    }

    #[test]
    fn negative_goals_names_row() {
        let csv = format!(
            "{HEADER}2021-06-02,England,Austria,1,0,England,no,friendly\n2021-06-03,France,Wales,-1,0,France,no,friendly\n"
        );
        match read_matches(csv.as_bytes(), "m.csv") {
            Err(Error::Row { row, message, .. }) => {
                assert_eq!(row, 2);
                assert!(message.contains("non-negative"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_date_and_type_rejected() {
        let bad_date = format!("{HEADER}2021-13-02,A,B,1,0,A,no,friendly\n");
        assert!(matches!(
            read_matches(bad_date.as_bytes(), "m.csv"),
            Err(Error::Row { row: 1, .. })
        ));
        let bad_type = format!("{HEADER}2021-06-02,A,B,1,0,A,no,exhibition\n");
        let err = read_matches(bad_type.as_bytes(), "m.csv").unwrap_err();
        assert!(err.to_string().contains("unknown match_type"));
    }

    #[test]
    fn wrong_header_is_schema_error() {
        let csv = "date,home,away\n";
        assert!(matches!(
            read_matches(csv.as_bytes(), "m.csv"),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn incomplete_feature_row_rejected() {
        let csv = format!(
            "{}\n2020,Hungary,10.1,,37,1.0,0,-0.295,-0.202,-0.01\n",
            FEATURES_HEADER.join(",")
        );
        let err = read_features(csv.as_bytes(), "f.csv").unwrap_err();
        assert!(err.to_string().contains("missing value for market_value_log"));
    }

    fn fv(year: i32, team: &str, hist: f64) -> TeamFeatureVector {
        TeamFeatureVector {
            tournament_year: year,
            team: TeamId::new(team),
            gdp_log: 10.0,
            market_value_log: 2.0,
            fifa_rank: 10,
            uefa_points: 30.0,
            cl_players: 1.0,
            hist_ability: hist,
            logability: 0.0,
            ave_pm: 0.0,
        }
    }

    #[test]
    fn self_match_has_zero_diff() {
        let table = FeatureTable::new([fv(2020, "A", 0.3)]);
        let m = MatchRecord {
            date: NaiveDate::from_ymd_opt(2021, 6, 15).unwrap(),
            home_team: "A".into(),
            away_team: "A".into(),
            goals_home: 1,
            goals_away: 1,
            venue_country: "X".into(),
            neutral: true,
            match_type: MatchType::ConfederationTournament,
        };
        let rows = build_diff_rows(&[m], &table).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.diff.iter().all(|d| *d == 0.0)));
        assert_eq!(rows[0].year, 2020);
    }

    #[test]
    fn missing_features_name_team_and_year() {
        let table = FeatureTable::new([fv(2016, "A", 0.3)]);
        let m = MatchRecord {
            date: NaiveDate::from_ymd_opt(2016, 6, 15).unwrap(),
            home_team: "A".into(),
            away_team: "B".into(),
            goals_home: 1,
            goals_away: 0,
            venue_country: "X".into(),
            neutral: true,
            match_type: MatchType::ConfederationTournament,
        };
        match build_diff_rows(&[m], &table) {
            Err(Error::MissingFeatures { team, year }) => {
                assert_eq!(team, "B");
                assert_eq!(year, 2016);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn registry_resolves_codes() {
        let reg = TeamRegistry::euro2024();
        assert_eq!(reg.resolve("CZE"), TeamId::from("Czech Republic"));
        assert_eq!(reg.resolve("Narnia"), TeamId::from("Narnia"));
    }
}
