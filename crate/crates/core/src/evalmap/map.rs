use std::collections::BTreeMap;

use geojson::{Feature, FeatureCollection, GeoJson, JsonObject, JsonValue};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geom::geojson::{to_multi_geometry, CRS_MEMBER};
use crate::grid::{cells_in_window, zonal_aggregate, Grid, GridError, GridFrame};
use crate::learn::CalibratedForest;
use crate::stands::Segment;
use crate::stands::{VariableSet, RASTER_PREDICTORS, SPRUCE_SHARE_LAYER};

pub const MIN_H95_M: f64 = 12.0;
pub const MIN_MAP_SPRUCE_PCT: f64 = 50.0;

/// Zonal raster values of one segment, plus its cell centroid as `X`/`Y`.
/// Missing entries are layers with no data over the segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    pub segment_id: String,
    pub values: BTreeMap<String, f64>,
}

impl SegmentFeatures {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub segment_id: String,
    pub applicable: bool,
    pub pred_br_m3ha: Option<f64>,
}

/// Zonal means/modes of the raster predictors and the spruce share layer
/// over every segment's cells.
pub fn segment_features(
    segments: &[Segment],
    grids: &BTreeMap<String, Grid>,
    frame: &GridFrame,
) -> Result<Vec<SegmentFeatures>, EvalError> {
    let mut layers = Vec::new();
    for name in RASTER_PREDICTORS.iter().chain([&SPRUCE_SHARE_LAYER]) {
        let grid = grids.get(*name).ok_or_else(|| GridError::Manifest {
            path: "<layers>".into(),
            message: format!("required layer {name} is missing"),
        })?;
        frame.agrees_with(&grid.frame).map_err(|message| GridError::Alignment {
            layer: name.to_string(),
            message,
        })?;
        layers.push((*name, grid));
    }
    Ok(segments
        .par_iter()
        .map(|seg| {
            let cells = cells_in_window(frame, &seg.bbox, |p| seg.contains(p));
            let mut values = BTreeMap::new();
            if let Some(c) = cells.centroid() {
                values.insert("X".to_string(), c.x);
                values.insert("Y".to_string(), c.y);
                for (name, grid) in &layers {
                    if let Ok(v) = zonal_aggregate(grid, &cells) {
                        values.insert(name.to_string(), v);
                    }
                }
            }
            SegmentFeatures {
                segment_id: seg.segment_id.clone(),
                values,
            }
        })
        .collect())
}

/// Mature spruce forest only: top height at least 12 m and at least half
/// the volume spruce.
pub fn applicability_mask(features: &SegmentFeatures) -> bool {
    match (features.get("H95_ALS"), features.get(SPRUCE_SHARE_LAYER)) {
        (Some(h95), Some(spruce)) => h95 >= MIN_H95_M && spruce >= MIN_MAP_SPRUCE_PCT,
        (h95, spruce) => {
            log::warn!(
                "segment={} not applicable: missing{}{}",
                features.segment_id,
                if h95.is_none() { " H95_ALS" } else { "" },
                if spruce.is_none() { " SPP_SR16" } else { "" }
            );
            false
        }
    }
}

/// Predict every applicable segment and render the map as a GeoJSON
/// FeatureCollection. `features` is aligned with `segments`.
pub fn render_prediction_map(
    model: &CalibratedForest,
    segments: &[Segment],
    features: &[SegmentFeatures],
    crs: Option<&str>,
) -> Result<(Vec<MapRecord>, String), EvalError> {
    if model.variable_set == VariableSet::All {
        return Err(EvalError::Map(
            "model uses harvester variables (variable set `all`); mapping needs a prior_to_harvest model".into(),
        ));
    }
    if segments.len() != features.len() {
        return Err(EvalError::Map(format!("{} segments but {} feature rows", segments.len(), features.len())));
    }
    let names = model.forest.names();
    let mut records = Vec::with_capacity(segments.len());
    for (seg, f) in segments.iter().zip(features) {
        if seg.segment_id != f.segment_id {
            return Err(EvalError::Map(format!("features for {} paired with segment {}", f.segment_id, seg.segment_id)));
        }
        let pred = if applicability_mask(f) {
            let row = names
                .iter()
                .map(|n| {
                    f.get(n).ok_or_else(|| {
                        EvalError::Map(format!("segment {}: predictor {n} has no data", seg.segment_id))
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            Some((model.predict(&row) * 10.0).round() / 10.0)
        } else {
            None
        };
        records.push(MapRecord {
            segment_id: seg.segment_id.clone(),
            applicable: pred.is_some(),
            pred_br_m3ha: pred,
        });
    }

    let features = segments
        .iter()
        .zip(&records)
        .map(|(seg, r)| {
            let mut p = JsonObject::new();
            p.insert("segment_id".into(), JsonValue::String(r.segment_id.clone()));
            p.insert("applicable".into(), JsonValue::Bool(r.applicable));
            if let Some(v) = r.pred_br_m3ha {
                p.insert("pred_br_m3ha".into(), JsonValue::from(v));
            }
            Feature {
                geometry: Some(to_multi_geometry(&seg.shape)),
                properties: Some(p),
                ..Default::default()
            }
        })
        .collect();
    let fc = FeatureCollection {
        bbox: None,
        features,
        foreign_members: crs.map(|c| {
            let mut m = JsonObject::new();
            m.insert(CRS_MEMBER.into(), JsonValue::String(c.into()));
            m
        }),
    };
    Ok((records, GeoJson::FeatureCollection(fc).to_string()))
}
