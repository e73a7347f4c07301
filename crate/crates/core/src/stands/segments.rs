use std::collections::BTreeSet;
use std::path::Path;

use geojson::{Feature, FeatureCollection, GeoJson, JsonObject, JsonValue};

use super::StandError;
use crate::geom::geojson::{from_geometry, to_geometry, CRS_MEMBER};
use crate::geom::{BBox, ShapeSet};

/// A mapped forest segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub segment_id: String,
    pub shape: ShapeSet,
    pub bbox: BBox,
}

impl Segment {
    pub fn new(segment_id: impl Into<String>, shape: ShapeSet) -> Result<Segment, StandError> {
        let segment_id = segment_id.into();
        let bbox = shape
            .bbox()
            .ok_or_else(|| StandError::Segments(format!("segment {segment_id} has no polygon")))?;
        Ok(Segment { segment_id, shape, bbox })
    }

    pub fn contains(&self, p: crate::geom::Point) -> bool {
        self.bbox.contains(p) && self.shape.contains(p)
    }
}

pub fn read_segments(path: impl AsRef<Path>) -> Result<Vec<Segment>, StandError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| StandError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    segments_from_geojson(&text).map_err(|e| match e {
        StandError::Segments(m) => StandError::Segments(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn id_string(v: &JsonValue) -> Option<String> {
    match v {
        JsonValue::String(s) => Some(s.clone()),
        JsonValue::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// FeatureCollection of Polygon / MultiPolygon features carrying a
/// `segment_id` property.
pub fn segments_from_geojson(text: &str) -> Result<Vec<Segment>, StandError> {
    let gj: GeoJson = text
        .parse()
        .map_err(|e: geojson::Error| StandError::Segments(e.to_string()))?;
    let GeoJson::FeatureCollection(fc) = gj else {
        return Err(StandError::Segments("expected a FeatureCollection".into()));
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.iter().enumerate() {
        let id = f
            .property("segment_id")
            .and_then(id_string)
            .ok_or_else(|| StandError::Segments(format!("feature {i} lacks a segment_id")))?;
        let geometry = f
            .geometry
            .as_ref()
            .ok_or_else(|| StandError::Segments(format!("segment {id} has no geometry")))?;
        let shape = from_geometry(geometry).map_err(|m| StandError::Segments(format!("segment {id}: {m}")))?;
        if !seen.insert(id.clone()) {
            return Err(StandError::Segments(format!("duplicate segment_id {id}")));
        }
        out.push(Segment::new(id, shape)?);
    }
    Ok(out)
}

pub fn segments_to_geojson(segments: &[Segment], crs: Option<&str>) -> String {
    let features = segments
        .iter()
        .map(|s| {
            let mut props = JsonObject::new();
            props.insert("segment_id".into(), JsonValue::String(s.segment_id.clone()));
            Feature {
                geometry: Some(to_geometry(&s.shape, None)),
                properties: Some(props),
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
    GeoJson::FeatureCollection(fc).to_string()
}
