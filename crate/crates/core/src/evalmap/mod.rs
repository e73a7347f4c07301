//! Accuracy metrics, leave-one-out cross-validation over stands or spatial
//! clusters, and segment-level prediction maps.

mod cv;
mod map;
mod metrics;

use thiserror::Error;

pub use cv::{
    fit_full_model, leave_cluster_out_cv, leave_stand_out_cv, write_cv_csv, CvRecord, CvReport, CvStrategy, FoldSummary,
};
pub use map::{
    applicability_mask, render_prediction_map, segment_features, MapRecord, SegmentFeatures, MIN_H95_M,
    MIN_MAP_SPRUCE_PCT,
};
pub use metrics::{compute_metrics, MetricsReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("cross-validation: {0}")]
    Cv(String),
    #[error("map: {0}")]
    Map(String),
    #[error(transparent)]
    Learn(#[from] crate::learn::LearnError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}
