//! Conversions between [`ShapeSet`] and GeoJSON geometries.
//!
//! Coordinates are written as planar metres. The coordinate reference
//! system travels as a foreign member string (`"planar_crs"`) on the
//! geometry or collection, never as a reprojection.

use geojson::{Geometry, JsonObject, JsonValue, Value};

use super::{Point, Polygon, Ring, ShapeSet};

pub const CRS_MEMBER: &str = "planar_crs";

fn ring_coords(ring: &Ring) -> Vec<Vec<f64>> {
    ring.0.iter().map(|p| vec![p.x, p.y]).collect()
}

fn polygon_coords(poly: &Polygon) -> Vec<Vec<Vec<f64>>> {
    poly.rings().map(ring_coords).collect()
}

/// A Polygon for one-polygon sets, otherwise a MultiPolygon.
pub fn to_geometry(shape: &ShapeSet, crs: Option<&str>) -> Geometry {
    let value = match shape.polygons.as_slice() {
        [one] => Value::Polygon(polygon_coords(one)),
        many => Value::MultiPolygon(many.iter().map(polygon_coords).collect()),
    };
    let mut g = Geometry::new(value);
    if let Some(crs) = crs {
        let mut fm = JsonObject::new();
        fm.insert(CRS_MEMBER.into(), JsonValue::String(crs.into()));
        g.foreign_members = Some(fm);
    }
    g
}

/// The `planar_crs` member of a GeoJSON document's top level, if any.
pub fn document_crs(text: &str) -> Option<String> {
    let value: JsonValue = serde_json::from_str(text).ok()?;
    value.get(CRS_MEMBER)?.as_str().map(str::to_string)
}

/// Always a MultiPolygon, even for a single polygon.
pub fn to_multi_geometry(shape: &ShapeSet) -> Geometry {
    Geometry::new(Value::MultiPolygon(shape.polygons.iter().map(polygon_coords).collect()))
}

fn ring_from(coords: &[Vec<f64>]) -> Result<Ring, String> {
    let pts: Vec<Point> = coords
        .iter()
        .map(|c| match c.as_slice() {
            [x, y, ..] if x.is_finite() && y.is_finite() => Ok(Point::new(*x, *y)),
            _ => Err("position needs two finite coordinates".to_string()),
        })
        .collect::<Result<_, _>>()?;
    if pts.len() < 4 || pts.first() != pts.last() {
        return Err("linear ring must be closed with at least 4 positions".into());
    }
    Ok(Ring(pts))
}

/// Normalize orientation: exterior counterclockwise, holes clockwise.
fn polygon_from(rings: &[Vec<Vec<f64>>]) -> Result<Polygon, String> {
    let mut iter = rings.iter();
    let mut exterior = ring_from(iter.next().ok_or("polygon without rings")?)?;
    if exterior.signed_area() < 0.0 {
        exterior.0.reverse();
    }
    let holes = iter
        .map(|r| {
            let mut h = ring_from(r)?;
            if h.signed_area() > 0.0 {
                h.0.reverse();
            }
            Ok(h)
        })
        .collect::<Result<_, String>>()?;
    Ok(Polygon { exterior, holes })
}

/// Accepts Polygon and MultiPolygon geometries.
pub fn from_geometry(geometry: &Geometry) -> Result<ShapeSet, String> {
    let polygons = match &geometry.value {
        Value::Polygon(rings) => vec![polygon_from(rings)?],
        Value::MultiPolygon(polys) => polys
            .iter()
            .map(|p| polygon_from(p))
            .collect::<Result<_, _>>()?,
        other => return Err(format!("expected Polygon or MultiPolygon, found {}", other.type_name())),
    };
    Ok(ShapeSet { polygons })
}
