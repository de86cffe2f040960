//! Tournament format: groups, round-of-16 bracket and the lookup table that
//! places the four best third-placed teams.
//!
//! The on-disk form is TOML; see `data/euro2024.toml` for the grammar:
//!
//! ```toml
//! year = 2024
//! [groups]
//! A = ["Germany", "Scotland", "Hungary", "Switzerland"]
//! # ... B to F
//! [knockout]
//! round_of_16 = [["1B", "3"], ["1A", "2C"], ...]   # bracket order
//! third_place_slots = ["1B", "1C", "1E", "1F"]
//! [knockout.third_place]
//! ABCD = "ADBC"   # qualified thirds -> opponent group per slot
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::TeamId;
use crate::error::{Error, Result};

pub const N_GROUPS: usize = 6;
pub const GROUP_SIZE: usize = 4;
pub const N_TEAMS: usize = N_GROUPS * GROUP_SIZE;
pub const N_THIRDS_QUALIFYING: usize = 4;

const EURO2024: &str = include_str!("../data/euro2024.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Winner(usize),
    RunnerUp(usize),
    /// Filled through the third-place table, keyed by the group winner the
    /// slot is paired with.
    Third,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawConfig {
    year: i32,
    groups: BTreeMap<String, Vec<String>>,
    knockout: RawKnockout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawKnockout {
    round_of_16: Vec<[String; 2]>,
    third_place_slots: Vec<String>,
    third_place: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct TournamentConfig {
    pub year: i32,
    pub group_names: Vec<String>,
    /// Team indices per group; team `i` is `teams[i]`.
    pub groups: Vec<[usize; GROUP_SIZE]>,
    pub teams: Vec<TeamId>,
    pub round_of_16: Vec<(Slot, Slot)>,
    /// Groups whose winners meet a third-placed team, in table column order.
    pub third_place_slots: Vec<usize>,
    /// Bitmask of qualified third-place groups -> opponent group per slot.
    pub third_place_table: HashMap<u8, Vec<usize>>,
    raw: RawConfig,
}

impl TournamentConfig {
    pub fn euro2024() -> Self {
        Self::from_toml_str(EURO2024).expect("bundled tournament config is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.raw).expect("config serializes")
    }

    /// Same format with the 24 team names replaced, group by group.
    pub fn with_teams(&self, groups: &[[TeamId; GROUP_SIZE]]) -> Result<Self> {
        let mut raw = self.raw.clone();
        if groups.len() != raw.groups.len() {
            return Err(Error::Config(format!("expected {} groups", raw.groups.len())));
        }
        for (slot, names) in raw.groups.values_mut().zip(groups) {
            *slot = names.iter().map(|t| t.0.clone()).collect();
        }
        Self::from_raw(raw)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let cfg_err = |m: String| Error::Config(m);
        if raw.groups.len() != N_GROUPS {
            return Err(cfg_err(format!("expected {N_GROUPS} groups, found {}", raw.groups.len())));
        }
        let group_names: Vec<String> = raw.groups.keys().cloned().collect();
        let group_of_name: HashMap<&str, usize> =
            group_names.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();

        let mut teams = Vec::with_capacity(N_TEAMS);
        let mut groups = Vec::with_capacity(N_GROUPS);
        let mut seen = BTreeSet::new();
        for (name, members) in &raw.groups {
            if members.len() != GROUP_SIZE {
                return Err(cfg_err(format!("group {name} must have {GROUP_SIZE} teams")));
            }
            let mut idx = [0; GROUP_SIZE];
            for (k, t) in members.iter().enumerate() {
                if !seen.insert(t.clone()) {
                    return Err(cfg_err(format!("team '{t}' appears more than once")));
                }
                idx[k] = teams.len();
                teams.push(TeamId::new(t.as_str()));
            }
            groups.push(idx);
        }

        let parse_slot = |s: &str| -> Result<Slot> {
            let s = s.trim();
            if s == "3" {
                return Ok(Slot::Third);
            }
            let (pos, g) = s.split_at(1);
            let gi = *group_of_name
                .get(g)
                .ok_or_else(|| cfg_err(format!("unknown group in slot '{s}'")))?;
            match pos {
                "1" => Ok(Slot::Winner(gi)),
                "2" => Ok(Slot::RunnerUp(gi)),
                _ => Err(cfg_err(format!("bad slot '{s}'"))),
            }
        };

        let ko = &raw.knockout;
        if ko.round_of_16.len() != 8 {
            return Err(cfg_err("round_of_16 must list 8 ties".into()));
        }
        let mut round_of_16 = Vec::with_capacity(8);
        for [a, b] in &ko.round_of_16 {
            round_of_16.push((parse_slot(a)?, parse_slot(b)?));
        }

        let mut third_place_slots = Vec::new();
        for s in &ko.third_place_slots {
            match parse_slot(s)? {
                Slot::Winner(g) => third_place_slots.push(g),
                _ => return Err(cfg_err(format!("third-place slot '{s}' must be a group winner"))),
            }
        }
        if third_place_slots.len() != N_THIRDS_QUALIFYING {
            return Err(cfg_err("third_place_slots must list 4 group winners".into()));
        }

        let mut third_place_table = HashMap::new();
        for (combo, assignment) in &ko.third_place {
            let combo_groups: Vec<usize> = combo
                .chars()
                .map(|c| {
                    group_of_name
                        .get(c.to_string().as_str())
                        .copied()
                        .ok_or_else(|| cfg_err(format!("unknown group '{c}' in '{combo}'")))
                })
                .collect::<Result<_>>()?;
            let assigned: Vec<usize> = assignment
                .chars()
                .map(|c| {
                    group_of_name
                        .get(c.to_string().as_str())
                        .copied()
                        .ok_or_else(|| cfg_err(format!("unknown group '{c}' in '{assignment}'")))
                })
                .collect::<Result<_>>()?;
            let cset: BTreeSet<usize> = combo_groups.iter().copied().collect();
            let aset: BTreeSet<usize> = assigned.iter().copied().collect();
            if cset.len() != N_THIRDS_QUALIFYING || cset != aset || assigned.len() != N_THIRDS_QUALIFYING {
                return Err(cfg_err(format!(
                    "third-place row {combo} = {assignment} must permute the combination"
                )));
            }
            let mask = combo_groups.iter().fold(0u8, |m, g| m | (1 << g));
            third_place_table.insert(mask, assigned);
        }

        let cfg = TournamentConfig {
            year: raw.year,
            group_names,
            groups,
            teams,
            round_of_16,
            third_place_slots,
            third_place_table,
            raw,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks: every winner and runner-up placed exactly once,
    /// thirds paired with the listed winners, all 15 combinations present
    /// and no round-of-16 tie between two teams of the same group.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        let mut winners = BTreeSet::new();
        let mut runners = BTreeSet::new();
        let mut third_partners = Vec::new();
        for (a, b) in &self.round_of_16 {
            for s in [a, b] {
                match s {
                    Slot::Winner(g) => {
                        if !winners.insert(*g) {
                            return err(format!("winner of {} placed twice", self.group_names[*g]));
                        }
                    }
                    Slot::RunnerUp(g) => {
                        if !runners.insert(*g) {
                            return err(format!("runner-up of {} placed twice", self.group_names[*g]));
                        }
                    }
                    Slot::Third => {}
                }
            }
            match (a, b) {
                (Slot::Winner(g), Slot::Third) | (Slot::Third, Slot::Winner(g)) => third_partners.push(*g),
                (Slot::Third, _) | (_, Slot::Third) => {
                    return err("a third-placed team must face a group winner".into())
                }
                (x, y) => {
                    if group_of_slot(x) == group_of_slot(y) {
                        return err("round-of-16 tie between teams of one group".into());
                    }
                }
            }
        }
        if winners.len() != N_GROUPS || runners.len() != N_GROUPS {
            return err("every group winner and runner-up must be placed".into());
        }
        let mut listed = self.third_place_slots.clone();
        listed.sort_unstable();
        third_partners.sort_unstable();
        if listed != third_partners {
            return err("third_place_slots do not match the bracket".into());
        }
        for mask in third_place_masks() {
            let Some(assigned) = self.third_place_table.get(&mask) else {
                return err(format!("third-place table lacks combination {}", self.mask_label(mask)));
            };
            for (slot_group, third_group) in self.third_place_slots.iter().zip(assigned) {
                if slot_group == third_group {
                    return err(format!(
                        "combination {} pairs group {} with its own winner",
                        self.mask_label(mask),
                        self.group_names[*slot_group]
                    ));
                }
            }
        }
        Ok(())
    }

    fn mask_label(&self, mask: u8) -> String {
        (0..N_GROUPS)
            .filter(|g| mask & (1 << g) != 0)
            .map(|g| self.group_names[g].as_str())
            .collect()
    }

    pub fn team_index(&self, team: &TeamId) -> Option<usize> {
        self.teams.iter().position(|t| t == team)
    }

    pub fn group_of_team(&self, team: usize) -> usize {
        team / GROUP_SIZE
    }

    /// The eight round-of-16 ties as team indices.
    ///
    /// `winners[g]`, `runners[g]` and `thirds[g]` are the first, second and
    /// third of group `g`; `qualified_thirds` lists the groups whose third
    /// place advanced.
    pub fn round_of_16_teams(
        &self,
        winners: &[usize],
        runners: &[usize],
        thirds: &[usize],
        qualified_thirds: &[usize],
    ) -> [(usize, usize); 8] {
        let mask = qualified_thirds.iter().fold(0u8, |m, g| m | (1 << g));
        let assigned = &self.third_place_table[&mask];
        let third_for = |winner_group: usize| {
            let col = self
                .third_place_slots
                .iter()
                .position(|g| *g == winner_group)
                .expect("validated");
            thirds[assigned[col]]
        };
        let mut out = [(0, 0); 8];
        for (k, (a, b)) in self.round_of_16.iter().enumerate() {
            let partner = match (a, b) {
                (Slot::Winner(g), Slot::Third) | (Slot::Third, Slot::Winner(g)) => Some(*g),
                _ => None,
            };
            let resolve = |s: &Slot| match s {
                Slot::Winner(g) => winners[*g],
                Slot::RunnerUp(g) => runners[*g],
                Slot::Third => third_for(partner.expect("validated")),
            };
            out[k] = (resolve(a), resolve(b));
        }
        out
    }
}

fn group_of_slot(s: &Slot) -> Option<usize> {
    match s {
        Slot::Winner(g) | Slot::RunnerUp(g) => Some(*g),
        Slot::Third => None,
    }
}

/// The 15 four-of-six group combinations.
pub fn third_place_masks() -> Vec<u8> {
    (0u8..64).filter(|m| m.count_ones() as usize == N_THIRDS_QUALIFYING).collect()
}
