use std::io::{Read, Write};

use geojson::{Feature, FeatureCollection, GeoJson, JsonObject, JsonValue};

use super::{cells_to_shape, HarvestedStand, StandError, StandSample, PREDICTORS};
use crate::geom::geojson::{from_geometry, to_multi_geometry, CRS_MEMBER};
use crate::geom::Point;
use crate::grid::{cells_in_window, GridFrame};

/// Shortest text that round-trips `v` after rounding to 6 significant
/// digits.
pub(crate) fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{}", if v == 0.0 { 0.0 } else { v });
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("float text");
    format!("{rounded}")
}

fn header() -> Vec<&'static str> {
    let mut h = vec!["stand_id", "br_vol"];
    h.extend(PREDICTORS);
    h
}

/// One row per sample, columns `stand_id, br_vol` then [`PREDICTORS`],
/// numbers to 6 significant digits.
pub fn write_stand_table<W: Write>(out: W, samples: &[StandSample]) -> Result<(), StandError> {
    let err = |e: csv::Error| StandError::Table(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header()).map_err(err)?;
    for s in samples {
        let mut rec = vec![s.stand_id.clone(), sig6(s.br_vol)];
        rec.extend(s.predictors.iter().map(|&v| sig6(v)));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| StandError::Table(e.to_string()))
}

pub fn read_stand_table<R: Read>(input: R) -> Result<Vec<StandSample>, StandError> {
    let mut r = csv::Reader::from_reader(input);
    let got = r.headers().map_err(|e| StandError::Table(e.to_string()))?.clone();
    let want = header();
    if got.iter().ne(want.iter().copied()) {
        return Err(StandError::Table(format!(
            "header mismatch: expected {}, found {}",
            want.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| StandError::Table(e.to_string()))?;
        let line = i + 2;
        let num = |j: usize| -> Result<f64, StandError> {
            let v: f64 = rec[j]
                .trim()
                .parse()
                .map_err(|_| StandError::Table(format!("line {line}: column {} is not a number", want[j])))?;
            if !v.is_finite() {
                return Err(StandError::Table(format!("line {line}: column {} is not finite", want[j])));
            }
            Ok(v)
        };
        out.push(StandSample {
            stand_id: rec[0].to_string(),
            br_vol: num(1)?,
            predictors: (2..want.len()).map(num).collect::<Result<_, _>>()?,
        });
    }
    Ok(out)
}

fn num(v: f64) -> JsonValue {
    serde_json::Number::from_f64(v).map(JsonValue::Number).unwrap_or(JsonValue::Null)
}

/// One MultiPolygon feature per stand traced from its member cells, with
/// the stand's bookkeeping as properties.
pub fn stands_to_geojson(stands: &[HarvestedStand], crs: Option<&str>) -> String {
    let features = stands
        .iter()
        .map(|s| {
            let mut p = JsonObject::new();
            p.insert("stand_id".into(), JsonValue::String(s.stand_id.clone()));
            p.insert("object_id".into(), JsonValue::String(s.object_id.clone()));
            p.insert("segment_id".into(), JsonValue::String(s.segment_id.clone()));
            p.insert("area_ha".into(), num(s.area_ha));
            p.insert("n_cells".into(), JsonValue::from(s.cells.len()));
            p.insert("n_stems".into(), JsonValue::from(s.n_stems()));
            p.insert("total_vol_m3".into(), num(s.total_vol_m3));
            p.insert("spruce_vol_m3".into(), num(s.spruce_vol_m3));
            p.insert("br_vol_m3".into(), num(s.br_vol_m3));
            p.insert("centroid_x".into(), num(s.centroid.x));
            p.insert("centroid_y".into(), num(s.centroid.y));
            p.insert(
                "stem_ids".into(),
                JsonValue::Array(s.stem_ids.iter().cloned().map(JsonValue::String).collect()),
            );
            Feature {
                geometry: Some(to_multi_geometry(&cells_to_shape(&s.cells))),
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
    GeoJson::FeatureCollection(fc).to_string()
}

/// Inverse of [`stands_to_geojson`]; member cells are the cells of `frame`
/// whose centers fall inside each outline.
pub fn read_stands_geojson(text: &str, frame: &GridFrame) -> Result<Vec<HarvestedStand>, StandError> {
    let bad = |m: String| StandError::Table(format!("stands: {m}"));
    let gj: GeoJson = text.parse().map_err(|e: geojson::Error| bad(e.to_string()))?;
    let GeoJson::FeatureCollection(fc) = gj else {
        return Err(bad("expected a FeatureCollection".into()));
    };
    let mut out = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.iter().enumerate() {
        let text_prop = |k: &str| {
            f.property(k)
                .and_then(JsonValue::as_str)
                .map(str::to_string)
                .ok_or_else(|| bad(format!("feature {i}: missing {k}")))
        };
        let num_prop = |k: &str| {
            f.property(k)
                .and_then(JsonValue::as_f64)
                .ok_or_else(|| bad(format!("feature {i}: missing {k}")))
        };
        let geometry = f.geometry.as_ref().ok_or_else(|| bad(format!("feature {i}: no geometry")))?;
        let shape = from_geometry(geometry).map_err(|m| bad(format!("feature {i}: {m}")))?;
        let bbox = shape.bbox().ok_or_else(|| bad(format!("feature {i}: empty geometry")))?;
        let cells = cells_in_window(frame, &bbox, |c| shape.contains(c));
        let n_cells = num_prop("n_cells")? as usize;
        if cells.len() != n_cells {
            return Err(bad(format!(
                "feature {i}: outline covers {} cells, n_cells = {n_cells}; wrong frame?",
                cells.len()
            )));
        }
        let stem_ids = f
            .property("stem_ids")
            .and_then(JsonValue::as_array)
            .ok_or_else(|| bad(format!("feature {i}: missing stem_ids")))?
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(format!("feature {i}: stem_ids must be strings")))?;
        out.push(HarvestedStand {
            stand_id: text_prop("stand_id")?,
            object_id: text_prop("object_id")?,
            segment_id: text_prop("segment_id")?,
            centroid: cells.centroid().unwrap_or(Point::new(num_prop("centroid_x")?, num_prop("centroid_y")?)),
            area_ha: cells.area_ha(),
            cells,
            stem_ids,
            total_vol_m3: num_prop("total_vol_m3")?,
            spruce_vol_m3: num_prop("spruce_vol_m3")?,
            br_vol_m3: num_prop("br_vol_m3")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellSet;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(23.9), "23.9");
        assert_eq!(sig6(216.29999), "216.3");
        assert_eq!(sig6(6712345.678), "6712350");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(-0.0), "0");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
    }

    #[test]
    fn table_roundtrip() {
        let samples = vec![
            StandSample {
                stand_id: "a/1".into(),
                br_vol: 23.9,
                predictors: (0..22).map(|i| i as f64 * 1.234567).collect(),
            },
            StandSample {
                stand_id: "b/2".into(),
                br_vol: 0.0,
                predictors: vec![1.0; 22],
            },
        ];
        let mut buf = Vec::new();
        write_stand_table(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("stand_id,br_vol,V_HRV,N_HRV,QMD_HRV,DR_HRV,SPP_HRV,Hmean_ALS"));
        let back = read_stand_table(buf.as_slice()).unwrap();
        assert_eq!(back[1], samples[1]);
        assert_eq!(back[0].predictors[1], 1.23457);
        let mut again = Vec::new();
        write_stand_table(&mut again, &back).unwrap();
        assert_eq!(again, buf);
        assert!(read_stand_table("stand_id,br_vol\nx,1\n".as_bytes()).is_err());
    }

    #[test]
    fn stands_geojson_roundtrip() {
        let frame = GridFrame {
            ncols: 10,
            nrows: 10,
            xll: 500.0,
            yll: 700.0,
            cellsize: 16.0,
        };
        let cells = CellSet::new(frame, vec![(1, 1), (1, 2), (2, 2), (4, 4), (5, 5)]);
        let stand = HarvestedStand {
            stand_id: "o/s".into(),
            object_id: "o".into(),
            segment_id: "s".into(),
            centroid: cells.centroid().unwrap(),
            area_ha: cells.area_ha(),
            cells,
            stem_ids: vec!["1".into(), "2".into()],
            total_vol_m3: 1.5,
            spruce_vol_m3: 1.0,
            br_vol_m3: 0.25,
        };
        let text = stands_to_geojson(std::slice::from_ref(&stand), Some("EPSG:25832"));
        let back = read_stands_geojson(&text, &frame).unwrap();
        assert_eq!(back, vec![stand]);
        let gj: GeoJson = text.parse().unwrap();
        let GeoJson::FeatureCollection(fc) = gj else { panic!() };
        assert_eq!(fc.features[0].geometry.as_ref().unwrap().value.type_name(), "MultiPolygon");
    }
}
