//! Run configuration and the glue between the workflow steps: ingest,
//! delineate, features, clustering and the correlation report.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalmap::EvalError;
use crate::geom::Point;
use crate::grid::{Grid, GridError, GridFrame};
use crate::harvester::{
    drop_violating, read_hpr, HarvestObject, simulate_head_positions, tree_table, validate, IngestError, TreeRecord, Violation,
};
use crate::learn::{
    default_k, kmeans_cluster, spearman_rho, ClusterAssignment, ForestParams, LearnError, DEFAULT_MIN_CLUSTER,
    DEFAULT_NODESIZE, DEFAULT_NTREE,
};
use crate::stands::{
    assemble_samples, delineate_stands, filter_stands, is_categorical, DelineationParams, DropReason, DroppedSample,
    FilterParams, HarvestedStand, Segment, SkippedObject, StandError, StandSample, DEFAULT_ALPHA_M,
    DEFAULT_BUFFER_M, MIN_AREA_HA, MIN_SPRUCE_SHARE_PCT, MIN_STEMS, PREDICTORS,
};
use std::collections::BTreeMap;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: IngestError,
    },
    #[error("duplicate harvest object {object_id} in {path}")]
    DuplicateObject { object_id: String, path: PathBuf },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Stand(#[from] StandError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub trees: Option<PathBuf>,
    pub segments: Option<PathBuf>,
    pub rasters: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// Every tunable of the workflow. Defaults are the published settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub alpha: f64,
    pub buffer_m: f64,
    pub min_area_ha: f64,
    pub min_stems: usize,
    pub min_spruce_pct: f64,
    pub ntree: usize,
    pub nodesize: usize,
    /// Cluster count; unset means `max(2, round(n / 11))`.
    pub k: Option<usize>,
    pub min_cluster: usize,
    pub seed: u64,
    pub spruce_labels: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: PathsConfig::default(),
            alpha: DEFAULT_ALPHA_M,
            buffer_m: DEFAULT_BUFFER_M,
            min_area_ha: MIN_AREA_HA,
            min_stems: MIN_STEMS,
            min_spruce_pct: MIN_SPRUCE_SHARE_PCT,
            ntree: DEFAULT_NTREE,
            nodesize: DEFAULT_NODESIZE,
            k: None,
            min_cluster: DEFAULT_MIN_CLUSTER,
            seed: DEFAULT_SEED,
            spruce_labels: vec!["spruce".to_string()],
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig, PipelineError> {
        let path = path.as_ref();
        let err = |message: String| PipelineError::Config {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        toml::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn delineation(&self) -> DelineationParams {
        DelineationParams {
            alpha: self.alpha,
            buffer_m: self.buffer_m,
            spruce_labels: self.spruce_labels.clone(),
        }
    }

    pub fn filters(&self) -> FilterParams {
        FilterParams {
            min_area_ha: self.min_area_ha,
            min_stems: self.min_stems,
            min_spruce_share_pct: self.min_spruce_pct,
        }
    }

    pub fn forest(&self) -> ForestParams {
        ForestParams {
            ntree: self.ntree,
            nodesize: self.nodesize,
            mtry: None,
        }
    }

    pub fn cluster_count(&self, n_stands: usize) -> usize {
        self.k.unwrap_or_else(|| default_k(n_stands))
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOutcome {
    pub trees: Vec<TreeRecord>,
    pub objects: usize,
    /// Stems removed for failing validation, with their object.
    pub dropped: Vec<(String, Violation)>,
}

/// Parse every production file, drop invalid stems, spread machine
/// positions and flatten into the tree table.
pub fn ingest(files: &[PathBuf], seed: u64) -> Result<IngestOutcome, PipelineError> {
    let mut out = IngestOutcome::default();
    let mut seen = BTreeSet::new();
    for path in files {
        let mut object = read_hpr(path).map_err(|source| PipelineError::Input {
            path: path.clone(),
            source,
        })?;
        if !seen.insert(object.object_id.clone()) {
            return Err(PipelineError::DuplicateObject {
                object_id: object.object_id,
                path: path.clone(),
            });
        }
        let violations = validate(&object);
        for v in &violations {
            log::warn!("file={} object={} {v}", path.display(), object.object_id);
        }
        drop_violating(&mut object, &violations);
        out.dropped
            .extend(violations.into_iter().map(|v| (object.object_id.clone(), v)));
        out.trees.extend(tree_table(&[simulate_head_positions(&object, seed)]));
        out.objects += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct DelineateOutcome {
    pub stands: Vec<HarvestedStand>,
    pub filtered: Vec<(HarvestedStand, DropReason)>,
    pub skipped: Vec<SkippedObject>,
}

pub fn delineate(
    trees: &[TreeRecord],
    segments: &[Segment],
    frame: &GridFrame,
    config: &PipelineConfig,
) -> Result<DelineateOutcome, PipelineError> {
    let d = delineate_stands(trees, segments, frame, &config.delineation())?;
    let (stands, filtered) = filter_stands(d.stands, &config.filters());
    for (s, reason) in &filtered {
        log::info!("stand={} filtered reason={reason}", s.stand_id);
    }
    Ok(DelineateOutcome {
        stands,
        filtered,
        skipped: d.skipped,
    })
}

pub fn features(
    stands: &[HarvestedStand],
    trees: &[TreeRecord],
    grids: &BTreeMap<String, Grid>,
    frame: &GridFrame,
    config: &PipelineConfig,
) -> Result<(Vec<StandSample>, Vec<DroppedSample>), PipelineError> {
    Ok(assemble_samples(stands, trees, grids, frame, &config.delineation())?)
}

/// Stand table of in-memory harvest objects: the ingest, delineate and
/// features steps without intermediate files.
pub fn stand_table(
    objects: &[HarvestObject],
    segments: &[Segment],
    grids: &BTreeMap<String, Grid>,
    frame: &GridFrame,
    config: &PipelineConfig,
) -> Result<Vec<StandSample>, PipelineError> {
    let mut trees = Vec::new();
    for o in objects {
        let mut o = o.clone();
        let violations = validate(&o);
        drop_violating(&mut o, &violations);
        trees.extend(tree_table(&[simulate_head_positions(&o, config.seed)]));
    }
    let d = delineate(&trees, segments, frame, config)?;
    Ok(features(&d.stands, &trees, grids, frame, config)?.0)
}

/// k-means on stand centroids (`X`, `Y`).
pub fn stand_clusters(samples: &[StandSample], config: &PipelineConfig) -> Result<ClusterAssignment, PipelineError> {
    let points: Vec<Point> = samples
        .iter()
        .map(|s| Point::new(s.get("X").expect("X column"), s.get("Y").expect("Y column")))
        .collect();
    let k = config.cluster_count(samples.len()).min(samples.len().max(1));
    Ok(kmeans_cluster(&points, k, config.min_cluster, config.seed)?)
}

/// Spearman rank correlation of each numeric predictor with the response;
/// `None` where a column is constant.
pub fn predictor_correlations(samples: &[StandSample]) -> Vec<(&'static str, Option<f64>)> {
    let y: Vec<f64> = samples.iter().map(|s| s.br_vol).collect();
    PREDICTORS
        .iter()
        .enumerate()
        .filter(|(_, n)| !is_categorical(n))
        .map(|(j, n)| {
            let x: Vec<f64> = samples.iter().map(|s| s.predictors[j]).collect();
            (*n, spearman_rho(&x, &y).ok())
        })
        .collect()
}
