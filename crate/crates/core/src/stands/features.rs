use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DelineationParams, HarvestedStand, StandError, PREDICTORS, RASTER_PREDICTORS};
use crate::grid::{zonal_aggregate, Grid, GridError, GridFrame};
use crate::harvester::TreeRecord;

/// Linear-interpolation quantile at rank `h = (n − 1)·p + 1` of the sorted
/// values.
pub fn dbh_quantile(values: &[f64], p: f64) -> Result<f64, StandError> {
    if values.is_empty() {
        return Err(StandError::EmptyInput);
    }
    assert!((0.0..=1.0).contains(&p), "quantile probability {p} outside [0, 1]");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvesterFeatures {
    /// Harvested volume, m³/ha.
    pub v_hrv: f64,
    /// Stems per hectare.
    pub n_hrv: f64,
    /// Quadratic mean dbh of spruce stems, cm.
    pub qmd_hrv: f64,
    /// Spread between the 90th and 10th dbh percentiles, cm.
    pub dr_hrv: f64,
    /// Spruce share of volume, %.
    pub spp_hrv: f64,
}

pub fn harvester_features(
    stand: &HarvestedStand,
    members: &[&TreeRecord],
    params: &DelineationParams,
) -> HarvesterFeatures {
    assert!(!members.is_empty(), "stand {} has no stems", stand.stand_id);
    let total: f64 = members.iter().map(|t| t.total_vol_m3).sum();
    let spruce: Vec<&&TreeRecord> = members.iter().filter(|t| params.is_spruce(&t.species)).collect();
    assert!(!spruce.is_empty(), "stand {} has no spruce stems", stand.stand_id);
    let spruce_vol: f64 = spruce.iter().map(|t| t.total_vol_m3).sum();
    let mean_sq = spruce.iter().map(|t| t.dbh_cm * t.dbh_cm).sum::<f64>() / spruce.len() as f64;
    let dbh: Vec<f64> = members.iter().map(|t| t.dbh_cm).collect();
    let dr = dbh_quantile(&dbh, 0.9).unwrap() - dbh_quantile(&dbh, 0.1).unwrap();
    HarvesterFeatures {
        v_hrv: total / stand.area_ha,
        n_hrv: members.len() as f64 / stand.area_ha,
        qmd_hrv: mean_sq.sqrt(),
        dr_hrv: dr,
        spp_hrv: if total > 0.0 { 100.0 * spruce_vol / total } else { 0.0 },
    }
}

/// One modeling row: the stand's BR volume per hectare and the predictors
/// in [`PREDICTORS`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct StandSample {
    pub stand_id: String,
    pub br_vol: f64,
    pub predictors: Vec<f64>,
}

impl StandSample {
    pub fn get(&self, name: &str) -> Option<f64> {
        PREDICTORS.iter().position(|n| *n == name).map(|i| self.predictors[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedSample {
    pub stand_id: String,
    pub reason: String,
}

/// Build the modeling rows. Every raster predictor must be present in
/// `grids`; stands with an all-nodata zone are dropped with a reason.
/// Output is sorted by stand id.
pub fn assemble_samples(
    stands: &[HarvestedStand],
    trees: &[TreeRecord],
    grids: &BTreeMap<String, Grid>,
    frame: &GridFrame,
    params: &DelineationParams,
) -> Result<(Vec<StandSample>, Vec<DroppedSample>), StandError> {
    let mut layers = Vec::with_capacity(RASTER_PREDICTORS.len());
    for name in RASTER_PREDICTORS {
        let grid = grids.get(name).ok_or_else(|| GridError::Manifest {
            path: "<layers>".into(),
            message: format!("required layer {name} is missing"),
        })?;
        frame.agrees_with(&grid.frame).map_err(|message| GridError::Alignment {
            layer: name.to_string(),
            message,
        })?;
        layers.push((name, grid));
    }
    let lookup: HashMap<(&str, &str), &TreeRecord> = trees.iter().map(|t| (t.key(), t)).collect();

    let rows: Vec<Result<StandSample, DroppedSample>> = stands
        .par_iter()
        .map(|stand| {
            let drop = |reason: String| DroppedSample {
                stand_id: stand.stand_id.clone(),
                reason,
            };
            let members: Vec<&TreeRecord> = stand
                .stem_ids
                .iter()
                .map(|id| {
                    lookup
                        .get(&(stand.object_id.as_str(), id.as_str()))
                        .copied()
                        .ok_or_else(|| drop(format!("stem {id} missing from tree table")))
                })
                .collect::<Result<_, _>>()?;
            if !members.iter().any(|t| params.is_spruce(&t.species)) {
                return Err(drop("no spruce stems".into()));
            }
            let h = harvester_features(stand, &members, params);
            let br: f64 = members.iter().map(|t| t.br_vol_m3).sum();
            let mut predictors = vec![h.v_hrv, h.n_hrv, h.qmd_hrv, h.dr_hrv, h.spp_hrv];
            for (name, grid) in &layers {
                let cells = crate::grid::CellSet::new(grid.frame, stand.cells.indices().to_vec());
                match zonal_aggregate(grid, &cells) {
                    Ok(v) => predictors.push(v),
                    Err(e) => return Err(drop(format!("{name}: {e}"))),
                }
            }
            predictors.push(stand.centroid.x);
            predictors.push(stand.centroid.y);
            if let Some(i) = predictors.iter().position(|v| !v.is_finite()) {
                return Err(drop(format!("{} is not finite", PREDICTORS[i])));
            }
            Ok(StandSample {
                stand_id: stand.stand_id.clone(),
                br_vol: br / stand.area_ha,
                predictors,
            })
        })
        .collect();

    let mut samples = Vec::new();
    let mut dropped = Vec::new();
    for r in rows {
        match r {
            Ok(s) => samples.push(s),
            Err(d) => {
                log::warn!("stand={} dropped reason=\"{}\"", d.stand_id, d.reason);
                dropped.push(d);
            }
        }
    }
    samples.sort_by(|a, b| a.stand_id.cmp(&b.stand_id));
    dropped.sort_by(|a, b| a.stand_id.cmp(&b.stand_id));
    Ok((samples, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellSet, GridKind, DEFAULT_NODATA};
    use crate::harvester::PositionSource;

    fn tree(id: &str, species: &str, dbh: f64, vol: f64, br: f64) -> TreeRecord {
        TreeRecord {
            stem_id: id.into(),
            object_id: "o".into(),
            species: species.into(),
            dbh_cm: dbh,
            x: 0.0,
            y: 0.0,
            pos_source: PositionSource::Head,
            total_vol_m3: vol,
            br_vol_m3: br,
        }
    }

    fn frame() -> GridFrame {
        GridFrame {
            ncols: 2,
            nrows: 2,
            xll: 0.0,
            yll: 0.0,
            cellsize: 50.0,
        }
    }

    fn stand(trees: &[TreeRecord]) -> HarvestedStand {
        let f = frame();
        let cells = CellSet::new(f, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        HarvestedStand {
            stand_id: "o/s".into(),
            object_id: "o".into(),
            segment_id: "s".into(),
            centroid: cells.centroid().unwrap(),
            area_ha: cells.area_ha(),
            cells,
            stem_ids: trees.iter().map(|t| t.stem_id.clone()).collect(),
            total_vol_m3: trees.iter().map(|t| t.total_vol_m3).sum(),
            spruce_vol_m3: 0.0,
            br_vol_m3: trees.iter().map(|t| t.br_vol_m3).sum(),
        }
    }

    fn grids(h95: [f64; 4]) -> BTreeMap<String, Grid> {
        RASTER_PREDICTORS
            .iter()
            .map(|&n| {
                let kind = if super::super::is_categorical(n) { GridKind::Categorical } else { GridKind::Continuous };
                let mut g = Grid::filled(frame(), kind, 1.0);
                if n == "H95_ALS" {
                    g.values = h95.to_vec();
                }
                (n.to_string(), g)
            })
            .collect()
    }

    #[test]
    fn quantiles() {
        let v: Vec<f64> = (1..=10).map(|i| i as f64 * 10.0).collect();
        assert!((dbh_quantile(&v, 0.10).unwrap() - 19.0).abs() < 1e-12);
        assert!((dbh_quantile(&v, 0.90).unwrap() - 91.0).abs() < 1e-12);
        assert_eq!(dbh_quantile(&[7.0, 3.0, 5.0], 0.0).unwrap(), 3.0);
        assert_eq!(dbh_quantile(&[7.0, 3.0, 5.0], 1.0).unwrap(), 7.0);
        assert!(matches!(dbh_quantile(&[], 0.5), Err(StandError::EmptyInput)));
    }

    #[test]
    fn qmd_and_shares() {
        let p = DelineationParams::default();
        let t = [tree("a", "spruce", 20.0, 1.0, 0.0), tree("b", "spruce", 20.0, 1.0, 0.0)];
        let refs: Vec<&TreeRecord> = t.iter().collect();
        assert_eq!(harvester_features(&stand(&t), &refs, &p).qmd_hrv, 20.0);

        let t = [
            tree("a", "spruce", 10.0, 2.0, 0.0),
            tree("b", "spruce", 30.0, 1.0, 0.0),
            tree("c", "pine", 40.0, 1.0, 0.0),
        ];
        let refs: Vec<&TreeRecord> = t.iter().collect();
        let h = harvester_features(&stand(&t), &refs, &p);
        assert!((h.qmd_hrv - 500f64.sqrt()).abs() < 1e-12);
        assert_eq!(h.spp_hrv, 75.0);
        assert_eq!(h.v_hrv, 4.0);
        assert_eq!(h.n_hrv, 3.0);
    }

    #[test]
    fn one_hectare_stand() {
        let p = DelineationParams::default();
        let trees: Vec<TreeRecord> = (0..100)
            .map(|i| tree(&format!("{i:03}"), "spruce", 25.0, 2.163, if i < 50 { 0.478 } else { 0.0 }))
            .collect();
        let s = stand(&trees);
        assert_eq!(s.area_ha, 1.0);
        let (samples, dropped) = assemble_samples(&[s], &trees, &grids([11.0, 12.0, 13.0, 14.0]), &frame(), &p).unwrap();
        assert!(dropped.is_empty());
        let row = &samples[0];
        assert!((row.br_vol - 23.9).abs() < 1e-9);
        assert!((row.get("V_HRV").unwrap() - 216.3).abs() < 1e-9);
        assert_eq!(row.get("H95_ALS"), Some(12.5));
        assert_eq!(row.get("X"), Some(50.0));
        assert_eq!(row.predictors.len(), 22);
    }

    #[test]
    fn healthy_stand_has_zero_response_and_nodata_drops() {
        let p = DelineationParams::default();
        let trees: Vec<TreeRecord> = (0..40).map(|i| tree(&format!("{i}"), "spruce", 25.0, 0.5, 0.0)).collect();
        let s = stand(&trees);
        let (samples, _) = assemble_samples(std::slice::from_ref(&s), &trees, &grids([1.0; 4]), &frame(), &p).unwrap();
        assert_eq!(samples[0].br_vol, 0.0);

        let (samples, dropped) =
            assemble_samples(std::slice::from_ref(&s), &trees, &grids([DEFAULT_NODATA; 4]), &frame(), &p).unwrap();
        assert!(samples.is_empty());
        assert!(dropped[0].reason.starts_with("H95_ALS"));

        let mut missing = grids([1.0; 4]);
        missing.remove("SOIL");
        assert!(assemble_samples(&[s], &trees, &missing, &frame(), &p).is_err());
    }

    #[test]
    fn response_bounded_by_volume() {
        let p = DelineationParams::default();
        let trees: Vec<TreeRecord> = (0..60)
            .map(|i| tree(&format!("{i}"), "spruce", 20.0 + i as f64 * 0.3, 0.4, (i % 7) as f64 * 0.05))
            .collect();
        let (samples, _) = assemble_samples(&[stand(&trees)], &trees, &grids([1.0; 4]), &frame(), &p).unwrap();
        let r = &samples[0];
        let v = r.get("V_HRV").unwrap();
        assert!(r.br_vol >= 0.0 && r.br_vol <= v);
    }
}
