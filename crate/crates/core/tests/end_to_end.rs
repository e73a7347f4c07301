use std::collections::HashMap;

use rotmap::grid::RasterManifest;
use rotmap::pipeline::{self, PipelineConfig};
use rotmap::stands::{read_segments, RASTER_PREDICTORS};
use rotmap::synthgen::{generate_scenario, ScenarioConfig};

#[test]
fn default_scenario_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let (m, truth) = generate_scenario(&ScenarioConfig::default(), dir.path(), 21).unwrap();
    let cfg = PipelineConfig::default();
    let files: Vec<_> = m.harvester.iter().map(|p| dir.path().join(p)).collect();
    let ingested = pipeline::ingest(&files, cfg.seed).unwrap();
    assert!(ingested.dropped.is_empty());
    let manifest = RasterManifest::load(dir.path().join(&m.rasters)).unwrap();
    let (frame, grids) = manifest.load_layers(&RASTER_PREDICTORS).unwrap();
    let segments = read_segments(dir.path().join(&m.segments)).unwrap();
    let d = pipeline::delineate(&ingested.trees, &segments, &frame, &cfg).unwrap();
    let (samples, dropped) = pipeline::features(&d.stands, &ingested.trees, &grids, &frame, &cfg).unwrap();
    assert!(dropped.is_empty(), "{dropped:?}");
    assert_eq!(samples.len(), truth.len());

    let by_id: HashMap<&str, f64> = truth.iter().map(|t| (t.stand_id.as_str(), t.br_vol)).collect();
    for s in &samples {
        let want = by_id[s.stand_id.as_str()];
        let rel = if want == 0.0 { s.br_vol.abs() } else { (s.br_vol - want).abs() / want };
        assert!(rel <= 0.05, "{}: {} vs {}", s.stand_id, s.br_vol, want);
    }
    let mean = samples.iter().map(|s| s.br_vol).sum::<f64>() / samples.len() as f64;
    assert!((mean - 23.9).abs() <= 0.15 * 23.9, "mean {mean}");
}
