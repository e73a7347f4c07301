//! Regression forests grown from scratch, with out-of-bag bookkeeping,
//! permutation importance, a linear bias correction, k-means on stand
//! centroids and rank correlation.

mod calibrate;
mod dataset;
mod forest;
mod importance;
mod kmeans;
mod model;
mod stats;
mod tree;

use thiserror::Error;

pub use calibrate::{fit_calibrated, fit_calibration, CalibratedForest, Calibration};
pub use dataset::{Dataset, VarKind};
pub use forest::{fit_random_forest, mtry_for, oob_predict, Forest, ForestParams, OobPrediction, VarMeta};
pub use importance::{permutation_importance, permutation_importance_with, Importance};
pub use kmeans::{default_k, kmeans_cluster, ClusterAssignment, DEFAULT_MIN_CLUSTER};
pub use model::{load_model, model_from_json, model_to_json, save_model, MODEL_VERSION};
pub use stats::{ols, pearson, ranks, spearman_rho};
pub use tree::{Node, Tree};

pub const DEFAULT_NTREE: usize = 500;
pub const DEFAULT_NODESIZE: usize = 5;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("empty input")]
    EmptyInput,
    #[error("data error: {0}")]
    Data(String),
    #[error("clustering: {0}")]
    Cluster(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("model: {0}")]
    Model(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}
