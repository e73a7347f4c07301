//! Harvested stands: segments cropped to the machine's working footprint,
//! the stand filters, and the per-stand modeling rows.

mod cells;
mod delineate;
mod features;
mod segments;
mod table;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{GeomError, Point};
use crate::grid::{CellSet, GridError};

pub use cells::cells_to_shape;
pub use delineate::{assign_trees_to_segments, delineate_stands, Delineation, SkippedObject};
pub use features::{
    assemble_samples, dbh_quantile, harvester_features, DroppedSample, HarvesterFeatures, StandSample,
};
pub use segments::{read_segments, segments_from_geojson, segments_to_geojson, Segment};
pub use table::{read_stand_table, read_stands_geojson, stands_to_geojson, write_stand_table};

pub const DEFAULT_ALPHA_M: f64 = 25.0;
pub const DEFAULT_BUFFER_M: f64 = 2.0;
pub const MIN_AREA_HA: f64 = 0.3;
pub const MIN_STEMS: usize = 30;
pub const MIN_SPRUCE_SHARE_PCT: f64 = 50.0;

/// Predictor columns in table order.
pub const PREDICTORS: [&str; 22] = [
    "V_HRV", "N_HRV", "QMD_HRV", "DR_HRV", "SPP_HRV", "Hmean_ALS", "Hvar_ALS", "H25_ALS", "H95_ALS",
    "D2_ALS", "NIR_S2", "AL_CLI", "SL_TER", "TS_CLI", "PS_CLI", "DC_CLI", "BON_SR16", "FT_AR5", "ST_AR5",
    "SOIL", "X", "Y",
];

/// Predictors only known after harvest.
pub const HARVESTER_PREDICTORS: [&str; 5] = ["V_HRV", "N_HRV", "QMD_HRV", "DR_HRV", "SPP_HRV"];

/// Predictors read from raster layers.
pub const RASTER_PREDICTORS: [&str; 15] = [
    "Hmean_ALS", "Hvar_ALS", "H25_ALS", "H95_ALS", "D2_ALS", "NIR_S2", "AL_CLI", "SL_TER", "TS_CLI",
    "PS_CLI", "DC_CLI", "BON_SR16", "FT_AR5", "ST_AR5", "SOIL",
];

pub const CATEGORICAL_PREDICTORS: [&str; 3] = ["FT_AR5", "ST_AR5", "SOIL"];

/// Optional layer with the mapped spruce volume share (%), used only by the
/// applicability mask.
pub const SPRUCE_SHARE_LAYER: &str = "SPP_SR16";

pub fn is_categorical(name: &str) -> bool {
    CATEGORICAL_PREDICTORS.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableSet {
    All,
    PriorToHarvest,
}

impl VariableSet {
    pub fn names(self) -> Vec<&'static str> {
        match self {
            VariableSet::All => PREDICTORS.to_vec(),
            VariableSet::PriorToHarvest => PREDICTORS
                .iter()
                .copied()
                .filter(|n| !HARVESTER_PREDICTORS.contains(n))
                .collect(),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            VariableSet::All => "all",
            VariableSet::PriorToHarvest => "prior_to_harvest",
        }
    }

    pub fn parse(s: &str) -> Option<VariableSet> {
        match s {
            "all" => Some(VariableSet::All),
            "prior" | "prior_to_harvest" => Some(VariableSet::PriorToHarvest),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum StandError {
    #[error("stem {object_id}/{stem_id} lies in several segments: {}", segments.join(", "))]
    Ambiguity {
        object_id: String,
        stem_id: String,
        segments: Vec<String>,
    },
    #[error("segments: {0}")]
    Segments(String),
    #[error("stand table: {0}")]
    Table(String),
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelineationParams {
    pub alpha: f64,
    pub buffer_m: f64,
    /// Species labels counted as spruce.
    pub spruce_labels: Vec<String>,
}

impl Default for DelineationParams {
    fn default() -> Self {
        DelineationParams {
            alpha: DEFAULT_ALPHA_M,
            buffer_m: DEFAULT_BUFFER_M,
            spruce_labels: vec!["spruce".to_string()],
        }
    }
}

impl DelineationParams {
    pub fn is_spruce(&self, species: &str) -> bool {
        self.spruce_labels.iter().any(|s| s == species)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub min_area_ha: f64,
    pub min_stems: usize,
    pub min_spruce_share_pct: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            min_area_ha: MIN_AREA_HA,
            min_stems: MIN_STEMS,
            min_spruce_share_pct: MIN_SPRUCE_SHARE_PCT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Area,
    Stems,
    Composition,
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DropReason::Area => "area",
            DropReason::Stems => "stems",
            DropReason::Composition => "composition",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarvestedStand {
    pub stand_id: String,
    pub object_id: String,
    pub segment_id: String,
    pub cells: CellSet,
    pub stem_ids: Vec<String>,
    /// Mean of member cell centers.
    pub centroid: Point,
    pub area_ha: f64,
    pub total_vol_m3: f64,
    pub spruce_vol_m3: f64,
    pub br_vol_m3: f64,
}

impl HarvestedStand {
    pub fn n_stems(&self) -> usize {
        self.stem_ids.len()
    }

    /// Spruce share of harvested volume, percent.
    pub fn spruce_share_pct(&self) -> f64 {
        if self.total_vol_m3 > 0.0 {
            100.0 * self.spruce_vol_m3 / self.total_vol_m3
        } else {
            0.0
        }
    }

    pub fn check_filters(&self, params: &FilterParams) -> Option<DropReason> {
        if self.area_ha < params.min_area_ha {
            Some(DropReason::Area)
        } else if self.n_stems() < params.min_stems {
            Some(DropReason::Stems)
        } else if self.spruce_share_pct() < params.min_spruce_share_pct {
            Some(DropReason::Composition)
        } else {
            None
        }
    }
}

pub fn stand_id(object_id: &str, segment_id: &str) -> String {
    format!("{object_id}/{segment_id}")
}

/// Split stands into those passing every filter and the rest, each with the
/// first failing filter.
pub fn filter_stands(
    stands: Vec<HarvestedStand>,
    params: &FilterParams,
) -> (Vec<HarvestedStand>, Vec<(HarvestedStand, DropReason)>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for s in stands {
        match s.check_filters(params) {
            None => kept.push(s),
            Some(reason) => dropped.push((s, reason)),
        }
    }
    (kept, dropped)
}
