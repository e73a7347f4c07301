//! Canonical tree table: one row per stem, the hand-off between ingest and
//! stand delineation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{HarvestObject, IngestError, PositionSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub stem_id: String,
    pub object_id: String,
    pub species: String,
    pub dbh_cm: f64,
    pub x: f64,
    pub y: f64,
    pub pos_source: PositionSource,
    pub total_vol_m3: f64,
    pub br_vol_m3: f64,
}

impl TreeRecord {
    /// Key unique across objects.
    pub fn key(&self) -> (&str, &str) {
        (&self.object_id, &self.stem_id)
    }
}

pub fn tree_table(objects: &[HarvestObject]) -> Vec<TreeRecord> {
    objects
        .iter()
        .flat_map(|o| {
            o.stems.iter().map(move |s| TreeRecord {
                stem_id: s.stem_id.clone(),
                object_id: o.object_id.clone(),
                species: s.species.label().to_string(),
                dbh_cm: s.dbh_cm,
                x: s.x,
                y: s.y,
                pos_source: s.position_source,
                total_vol_m3: s.total_volume(),
                br_vol_m3: s.br_volume(),
            })
        })
        .collect()
}

pub fn write_tree_table<W: Write>(out: W, trees: &[TreeRecord]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    for t in trees {
        w.serialize(t)?;
    }
    w.flush().map_err(|e| IngestError::Table(e.into()))?;
    Ok(())
}

pub fn read_tree_table<R: Read>(input: R) -> Result<Vec<TreeRecord>, IngestError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let expected = [
        "stem_id",
        "object_id",
        "species",
        "dbh_cm",
        "x",
        "y",
        "pos_source",
        "total_vol_m3",
        "br_vol_m3",
    ];
    if headers.iter().ne(expected) {
        return Err(IngestError::Schema(format!(
            "tree table header is `{}`, expected `{}`",
            headers.iter().collect::<Vec<_>>().join(","),
            expected.join(",")
        )));
    }
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harvester::{Assortment, LogProduct, Species, StemRecord};

    #[test]
    fn header_and_roundtrip() {
        let o = HarvestObject {
            object_id: "O1".into(),
            machine_id: "M".into(),
            stems: vec![StemRecord {
                stem_id: "5".into(),
                species: Species::Spruce,
                dbh_cm: 31.5,
                x: 10.25,
                y: 20.5,
                position_source: PositionSource::Machine,
                products: vec![
                    LogProduct {
                        assortment: Assortment::Sawlog,
                        volume_m3: 0.5,
                        length_cm: None,
                    },
                    LogProduct {
                        assortment: Assortment::BrPulpwood,
                        volume_m3: 0.25,
                        length_cm: None,
                    },
                ],
            }],
        };
        let rows = tree_table(&[o]);
        let mut buf = Vec::new();
        write_tree_table(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "stem_id,object_id,species,dbh_cm,x,y,pos_source,total_vol_m3,br_vol_m3\n"
        ));
        assert!(text.contains("5,O1,spruce,31.5,10.25,20.5,machine,0.75,0.25"));
        assert_eq!(read_tree_table(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn wrong_header_rejected() {
        let bad = "id,object\n1,2\n";
        assert!(matches!(read_tree_table(bad.as_bytes()), Err(IngestError::Schema(_))));
    }
}
