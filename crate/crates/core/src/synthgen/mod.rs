//! Synthetic scenarios: harvester files, raster layers, segments and the
//! true per-stand butt-rot volume, generated together from one seed.
//!
//! Stands sit in spatial clusters on a regular lattice. Each harvested
//! stand is an axis-aligned rectangular footprint inside a larger segment;
//! footprint edges lie 1 to 3 m outside grid lines, so the true stand area
//! is a whole number of cells. Stand maturity drives both the canopy height
//! layers and the infection probability, and each cluster adds a random
//! shift to the stands' expected rot volume.

mod layout;
mod layers;
mod stems;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{write_grid_file, Grid, GridError, GridFrame, GridKind, LayerSpec, RasterManifest};
use crate::harvester::{write_hpr, HarvestObject};
use crate::stands::{segments_to_geojson, Segment, MIN_SPRUCE_SHARE_PCT, MIN_STEMS};

pub use layout::{Plot, PlotKind};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("truth table: {0}")]
    Table(#[from] csv::Error),
}

/// Per-stem infection model: `logistic(logit(base_rate) + dbh_coef·(dbh −
/// qmd) + maturity_coef·(maturity − 0.5) + shift)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RotModel {
    /// Infection probability of a reference stem before calibration.
    pub base_rate: f64,
    /// Logit change per cm of DBH.
    pub dbh_coef: f64,
    /// Logit change from the youngest to the oldest stand.
    pub maturity_coef: f64,
    /// Mean share of an infected stem's volume graded as damaged.
    pub br_fraction_mean: f64,
    /// Beta concentration of that share.
    pub br_fraction_concentration: f64,
}

impl Default for RotModel {
    fn default() -> Self {
        RotModel {
            base_rate: 0.3,
            dbh_coef: 0.06,
            maturity_coef: 3.0,
            br_fraction_mean: 0.3,
            br_fraction_concentration: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_clusters: usize,
    pub stands_per_cluster: usize,
    /// Unharvested segments per cluster, included in the map but not in
    /// the harvester files.
    pub extra_segments_per_cluster: usize,
    pub stems_per_ha_mean: f64,
    pub stems_per_ha_sd: f64,
    /// Mean harvested volume, m³/ha.
    pub volume_m3ha: f64,
    pub qmd_cm: f64,
    pub qmd_sd_cm: f64,
    /// Mean spruce share of stems, percent.
    pub spruce_pct: f64,
    /// Mean butt-rot volume the rot model is calibrated to, m³/ha.
    pub br_vol_m3ha: f64,
    /// Standard deviation of the per-cluster shift in expected butt-rot
    /// volume, m³/ha.
    pub cluster_effect_sd: f64,
    pub head_position_share: f64,
    pub cluster_spacing_m: f64,
    pub crs: Option<String>,
    pub rot: RotModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_clusters: 5,
            stands_per_cluster: 6,
            extra_segments_per_cluster: 2,
            stems_per_ha_mean: 743.0,
            stems_per_ha_sd: 150.0,
            volume_m3ha: 216.3,
            qmd_cm: 22.0,
            qmd_sd_cm: 3.3,
            spruce_pct: 90.0,
            br_vol_m3ha: 23.9,
            cluster_effect_sd: 10.0,
            head_position_share: 0.52,
            cluster_spacing_m: 1000.0,
            crs: Some("EPSG:25833".into()),
            rot: RotModel::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.n_clusters == 0 || self.stands_per_cluster == 0 {
            return bad("need at least one cluster with one stand".into());
        }
        for (name, v) in [
            ("head_position_share", self.head_position_share),
            ("rot.base_rate", self.rot.base_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} is not a share in [0, 1]"));
            }
        }
        if self.rot.base_rate == 1.0 {
            return bad("rot.base_rate must be below 1".into());
        }
        if !(self.rot.br_fraction_mean > 0.0 && self.rot.br_fraction_mean < 1.0) {
            return bad(format!("rot.br_fraction_mean = {} is not in (0, 1)", self.rot.br_fraction_mean));
        }
        if !(self.rot.br_fraction_concentration > 0.0) {
            return bad("rot.br_fraction_concentration must be positive".into());
        }
        for (name, v) in [
            ("stems_per_ha_sd", self.stems_per_ha_sd),
            ("qmd_sd_cm", self.qmd_sd_cm),
            ("cluster_effect_sd", self.cluster_effect_sd),
            ("br_vol_m3ha", self.br_vol_m3ha),
        ] {
            if !(v >= 0.0) {
                return bad(format!("{name} = {v} must be non-negative"));
            }
        }
        if !(self.volume_m3ha > 0.0) || !(self.qmd_cm >= 8.0) {
            return bad("volume_m3ha must be positive and qmd_cm at least 8".into());
        }
        let fewest = ((self.stems_per_ha_mean - 2.0 * self.stems_per_ha_sd) * layout::min_footprint_ha()).floor();
        if fewest < MIN_STEMS as f64 {
            return bad(format!(
                "stems_per_ha {} ± {} gives stands with as few as {fewest} stems, below the {MIN_STEMS}-stem filter",
                self.stems_per_ha_mean, self.stems_per_ha_sd
            ));
        }
        if self.spruce_pct < stems::MIN_STAND_SPRUCE * 100.0 || self.spruce_pct > 100.0 {
            return bad(format!(
                "spruce_pct {} must lie in [{}, 100] for stands to pass the {MIN_SPRUCE_SHARE_PCT} % composition filter",
                self.spruce_pct,
                stems::MIN_STAND_SPRUCE * 100.0
            ));
        }
        Ok(())
    }
}

/// True values of one harvested stand. `area_ha` counts the grid cells
/// inside the footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub stand_id: String,
    pub object_id: String,
    pub segment_id: String,
    pub cluster: usize,
    pub maturity: f64,
    pub cluster_effect: f64,
    pub n_stems: usize,
    pub area_ha: f64,
    pub total_vol_m3: f64,
    pub spruce_vol_m3: f64,
    pub br_vol_m3: f64,
    /// Butt-rot volume per hectare, the modeling response.
    pub br_vol: f64,
}

/// A generated scenario held in memory.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub frame: GridFrame,
    pub plots: Vec<Plot>,
    pub objects: Vec<HarvestObject>,
    pub grids: BTreeMap<String, Grid>,
    pub segments: Vec<Segment>,
    pub truth: Vec<TruthRecord>,
    pub crs: Option<String>,
}

/// Paths written by [`write_scenario`], relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub seed: u64,
    pub harvester: Vec<PathBuf>,
    pub rasters: PathBuf,
    pub segments: PathBuf,
    pub truth: PathBuf,
    pub config: ScenarioConfig,
}

impl ScenarioManifest {
    pub const FILE_NAME: &'static str = "scenario.toml";

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

pub fn build_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario, SynthError> {
    config.validate()?;
    let (frame, plots) = layout::lay_out(config, seed);
    let segments = plots
        .iter()
        .map(|p| Segment::new(p.segment_id.clone(), p.segment_shape()).expect("rectangle"))
        .collect();
    let (objects, truth) = stems::generate(config, &frame, &plots, seed)?;
    let grids = layers::render(config, &frame, &plots, seed);
    Ok(Scenario {
        frame,
        plots,
        objects,
        grids,
        segments,
        truth,
        crs: config.crs.clone(),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write every scenario file below `out_dir` and the `scenario.toml`
/// manifest listing them.
pub fn write_scenario(
    scenario: &Scenario,
    config: &ScenarioConfig,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<ScenarioManifest, SynthError> {
    let out = out_dir.as_ref();
    for sub in ["harvester", "rasters"] {
        let d = out.join(sub);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let mut harvester = Vec::new();
    for o in &scenario.objects {
        let rel = PathBuf::from("harvester").join(format!("{}.hpr", o.object_id));
        let path = out.join(&rel);
        std::fs::write(&path, write_hpr(o)).map_err(io_err(&path))?;
        harvester.push(rel);
    }

    let mut manifest = RasterManifest::default();
    for (name, grid) in &scenario.grids {
        let file = format!("{name}.asc");
        write_grid_file(grid, out.join("rasters").join(&file))?;
        manifest.layers.insert(
            name.clone(),
            LayerSpec {
                path: file.into(),
                kind: grid.kind,
            },
        );
    }
    let rasters = PathBuf::from("rasters").join("manifest.toml");
    let path = out.join(&rasters);
    std::fs::write(&path, manifest.to_toml()).map_err(io_err(&path))?;

    let segments = PathBuf::from("segments.geojson");
    let path = out.join(&segments);
    std::fs::write(&path, segments_to_geojson(&scenario.segments, scenario.crs.as_deref())).map_err(io_err(&path))?;

    let truth = PathBuf::from("truth.csv");
    let path = out.join(&truth);
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = csv::Writer::from_writer(file);
    for t in &scenario.truth {
        w.serialize(t)?;
    }
    w.flush().map_err(io_err(&path))?;

    let m = ScenarioManifest {
        seed,
        harvester,
        rasters,
        segments,
        truth,
        config: config.clone(),
    };
    let path = out.join(ScenarioManifest::FILE_NAME);
    std::fs::write(&path, m.to_toml()).map_err(io_err(&path))?;
    Ok(m)
}

/// Build and write a scenario; returns the manifest and the truth table.
pub fn generate_scenario(
    config: &ScenarioConfig,
    out_dir: impl AsRef<Path>,
    seed: u64,
) -> Result<(ScenarioManifest, Vec<TruthRecord>), SynthError> {
    let scenario = build_scenario(config, seed)?;
    let manifest = write_scenario(&scenario, config, seed, out_dir)?;
    Ok((manifest, scenario.truth))
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<Vec<TruthRecord>, SynthError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(file);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub(crate) fn layer_kind(name: &str) -> GridKind {
    if crate::stands::is_categorical(name) {
        GridKind::Categorical
    } else {
        GridKind::Continuous
    }
}
