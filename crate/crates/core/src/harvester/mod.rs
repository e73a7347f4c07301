//! Harvester production records: stems, cut products and tree positions.
//!
//! Files follow a small subset of the StanForD production schema (see
//! [`hpr`]). Parsed objects are checked with [`validate`], machine-recorded
//! positions are spread around the machine with [`simulate_head_positions`],
//! and the result is flattened into the canonical tree table ([`table`]).

pub mod hpr;
pub mod table;

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds;

pub use hpr::{parse_hpr, parse_hpr_with_report, read_hpr, write_hpr, ParseReport};
pub use table::{read_tree_table, tree_table, write_tree_table, TreeRecord};

/// Half-width of the uniform displacement applied to machine-positioned stems.
pub const JITTER_HALF_WIDTH_M: f64 = 8.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Parse {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("tree table: {0}")]
    Table(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assortment {
    Sawlog,
    Pulpwood,
    EnergyWood,
    BrPulpwood,
    BrEnergyWood,
    BrCutoff,
}

impl Assortment {
    pub const ALL: [Assortment; 6] = [
        Assortment::Sawlog,
        Assortment::Pulpwood,
        Assortment::EnergyWood,
        Assortment::BrPulpwood,
        Assortment::BrEnergyWood,
        Assortment::BrCutoff,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Assortment::Sawlog => "sawlog",
            Assortment::Pulpwood => "pulpwood",
            Assortment::EnergyWood => "energy_wood",
            Assortment::BrPulpwood => "br_pulpwood",
            Assortment::BrEnergyWood => "br_energy_wood",
            Assortment::BrCutoff => "br_cutoff",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.code() == code)
    }

    /// True for the three butt-rot damaged categories.
    pub fn is_br(self) -> bool {
        matches!(
            self,
            Assortment::BrPulpwood | Assortment::BrEnergyWood | Assortment::BrCutoff
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Species {
    Spruce,
    Pine,
    Birch,
    Other(String),
}

impl Species {
    pub fn parse(code: &str) -> Species {
        match code.to_ascii_lowercase().as_str() {
            "spruce" => Species::Spruce,
            "pine" => Species::Pine,
            "birch" => Species::Birch,
            _ => Species::Other(code.to_string()),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Species::Spruce => "spruce",
            Species::Pine => "pine",
            Species::Birch => "birch",
            Species::Other(code) => code,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionSource {
    /// Position of the harvester head; accurate to the tree.
    Head,
    /// Position of the machine body; the tree stood somewhere within reach.
    Machine,
}

impl PositionSource {
    pub fn code(self) -> &'static str {
        match self {
            PositionSource::Head => "head",
            PositionSource::Machine => "machine",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "head" => Some(PositionSource::Head),
            "machine" => Some(PositionSource::Machine),
            _ => None,
        }
    }
}

/// One cut product. Volume in m³ solid over bark, length in cm.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProduct {
    pub assortment: Assortment,
    pub volume_m3: f64,
    pub length_cm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StemRecord {
    pub stem_id: String,
    pub species: Species,
    pub dbh_cm: f64,
    pub x: f64,
    pub y: f64,
    pub position_source: PositionSource,
    pub products: Vec<LogProduct>,
}

impl StemRecord {
    /// Sum of all product volumes, butt-rot cut-offs included.
    pub fn total_volume(&self) -> f64 {
        self.products.iter().map(|p| p.volume_m3).sum()
    }

    pub fn br_volume(&self) -> f64 {
        stem_br_volume(self)
    }
}

/// Butt-rot volume of a stem: the summed volume of its damaged products.
pub fn stem_br_volume(stem: &StemRecord) -> f64 {
    stem.products
        .iter()
        .filter(|p| p.assortment.is_br())
        .map(|p| p.volume_m3)
        .sum()
}

/// All stems of one production file.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestObject {
    pub object_id: String,
    pub machine_id: String,
    pub stems: Vec<StemRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    NonpositiveDbh,
    NoProducts,
    NonpositiveVolume,
    BrOnNonSpruce,
    BrExceedsTotal,
    DuplicateStemId,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::NonpositiveDbh => "nonpositive dbh",
            Rule::NoProducts => "no products",
            Rule::NonpositiveVolume => "nonpositive product volume",
            Rule::BrOnNonSpruce => "BR on non-spruce",
            Rule::BrExceedsTotal => "BR volume exceeds stem volume",
            Rule::DuplicateStemId => "duplicate stem id",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub stem_id: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stem {}: {}", self.stem_id, self.rule)
    }
}

/// Check every stem invariant. An empty result means the object is clean.
pub fn validate(object: &HarvestObject) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for stem in &object.stems {
        let mut flag = |rule| {
            out.push(Violation {
                stem_id: stem.stem_id.clone(),
                rule,
            })
        };
        if !seen.insert(stem.stem_id.as_str()) {
            flag(Rule::DuplicateStemId);
        }
        if !(stem.dbh_cm > 0.0) {
            flag(Rule::NonpositiveDbh);
        }
        if stem.products.is_empty() {
            flag(Rule::NoProducts);
        }
        if stem.products.iter().any(|p| !(p.volume_m3 > 0.0)) {
            flag(Rule::NonpositiveVolume);
        }
        let br = stem_br_volume(stem);
        if br > 0.0 && stem.species != Species::Spruce {
            flag(Rule::BrOnNonSpruce);
        }
        if br > 0.0 && br > stem.total_volume() {
            flag(Rule::BrExceedsTotal);
        }
    }
    out
}

/// Drop every stem named in `violations`; returns the number removed.
pub fn drop_violating(object: &mut HarvestObject, violations: &[Violation]) -> usize {
    let bad: HashSet<&str> = violations.iter().map(|v| v.stem_id.as_str()).collect();
    let before = object.stems.len();
    object.stems.retain(|s| !bad.contains(s.stem_id.as_str()));
    before - object.stems.len()
}

/// Displace machine-positioned stems by independent uniform offsets in
/// `[-8, 8]` m on each axis. Head-positioned stems are left untouched.
///
/// The offsets of a stem come from a stream keyed by `(seed, object_id,
/// stem_id)`, so the result does not depend on stem order.
pub fn simulate_head_positions(object: &HarvestObject, seed: u64) -> HarvestObject {
    let stems = object
        .stems
        .iter()
        .map(|stem| {
            let mut stem = stem.clone();
            if stem.position_source == PositionSource::Machine {
                let (dx, dy) = jitter_offset(seed, &object.object_id, &stem.stem_id);
                stem.x += dx;
                stem.y += dy;
            }
            stem
        })
        .collect();
    HarvestObject {
        object_id: object.object_id.clone(),
        machine_id: object.machine_id.clone(),
        stems,
    }
}

pub(crate) fn jitter_offset(seed: u64, object_id: &str, stem_id: &str) -> (f64, f64) {
    let key = format!("{object_id}\u{1f}{stem_id}");
    let mut rng = seeds::keyed_stream(seed, "jitter", &key);
    let h = JITTER_HALF_WIDTH_M;
    (rng.random_range(-h..=h), rng.random_range(-h..=h))
}
