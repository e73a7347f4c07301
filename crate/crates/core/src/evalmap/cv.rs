use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_metrics, EvalError, MetricsReport};
use crate::learn::{
    fit_calibrated, permutation_importance, CalibratedForest, Calibration, ClusterAssignment, Dataset, ForestParams,
    Importance, LearnError,
};
use crate::seeds;
use crate::stands::{StandSample, VariableSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvStrategy {
    #[serde(rename = "StandCV")]
    Stand,
    #[serde(rename = "ClusterCV")]
    Cluster,
}

impl CvStrategy {
    pub fn name(self) -> &'static str {
        match self {
            CvStrategy::Stand => "StandCV",
            CvStrategy::Cluster => "ClusterCV",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub stand_id: String,
    pub fold_id: usize,
    pub observed: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold_id: usize,
    pub held_out: Vec<String>,
    pub n_train: usize,
    pub calibration: Calibration,
    /// Stand ids the fold's model was trained on.
    #[serde(skip)]
    pub train_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub strategy: CvStrategy,
    pub variable_set: VariableSet,
    pub seed: u64,
    pub ntree: usize,
    pub nodesize: usize,
    pub records: Vec<CvRecord>,
    pub metrics: MetricsReport,
    /// Permutation importance of a model fit to every stand.
    pub importance: Vec<Importance>,
    pub folds: Vec<FoldSummary>,
}

impl CvReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Flat per-stand table: `stand_id,fold_id,observed,predicted`.
pub fn write_cv_csv<W: Write>(out: W, report: &CvReport) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stand_id", "fold_id", "observed", "predicted"])?;
    for r in &report.records {
        w.write_record([
            r.stand_id.clone(),
            r.fold_id.to_string(),
            r.observed.to_string(),
            r.predicted.to_string(),
        ])?;
    }
    w.flush()
}

/// Each stand predicted by a model trained on every other stand.
pub fn leave_stand_out_cv(
    samples: &[StandSample],
    variable_set: VariableSet,
    params: &ForestParams,
    seed: u64,
) -> Result<CvReport, EvalError> {
    if samples.len() < 3 {
        return Err(EvalError::Cv(format!("need at least 3 stands, got {}", samples.len())));
    }
    let sorted = sorted_samples(samples)?;
    let groups: Vec<Vec<usize>> = (0..sorted.len()).map(|i| vec![i]).collect();
    run_cv(CvStrategy::Stand, &sorted, &groups, variable_set, params, seed)
}

/// Each cluster predicted by a model that never saw any of its stands.
/// `clusters.labels` is aligned with `samples`.
pub fn leave_cluster_out_cv(
    samples: &[StandSample],
    clusters: &ClusterAssignment,
    variable_set: VariableSet,
    params: &ForestParams,
    seed: u64,
) -> Result<CvReport, EvalError> {
    if clusters.labels.len() != samples.len() {
        return Err(EvalError::Cv(format!(
            "{} cluster labels for {} stands",
            clusters.labels.len(),
            samples.len()
        )));
    }
    let labelled: BTreeSet<usize> = clusters.labels.iter().copied().collect();
    if labelled.len() < 2 {
        return Err(EvalError::Cv(format!("need at least 2 clusters, got {}", labelled.len())));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].stand_id.cmp(&samples[b].stand_id));
    let sorted = sorted_samples(samples)?;
    let groups: Vec<Vec<usize>> = labelled
        .iter()
        .map(|&c| (0..order.len()).filter(|&i| clusters.labels[order[i]] == c).collect())
        .collect();
    run_cv(CvStrategy::Cluster, &sorted, &groups, variable_set, params, seed)
}

/// Model fit to every row and its permutation importance, from streams
/// derived from `seed`. The model is the one a CV report's importance
/// table describes.
pub fn fit_full_model(
    data: &Dataset,
    variable_set: VariableSet,
    params: &ForestParams,
    seed: u64,
) -> Result<(CalibratedForest, Vec<Importance>), LearnError> {
    let model = fit_calibrated(data, variable_set, params, seeds::derive(seed, "full_model", 0))?;
    let importance = permutation_importance(&model.forest, data, seeds::derive(seed, "importance", 0));
    Ok((model, importance))
}

fn sorted_samples(samples: &[StandSample]) -> Result<Vec<StandSample>, EvalError> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.stand_id.cmp(&b.stand_id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].stand_id == w[1].stand_id) {
        return Err(EvalError::Cv(format!("duplicate stand id {}", w[0].stand_id)));
    }
    Ok(sorted)
}

fn run_cv(
    strategy: CvStrategy,
    samples: &[StandSample],
    groups: &[Vec<usize>],
    variable_set: VariableSet,
    params: &ForestParams,
    seed: u64,
) -> Result<CvReport, EvalError> {
    let data = Dataset::from_samples(samples, variable_set)?;
    let label = match strategy {
        CvStrategy::Stand => "stand_fold",
        CvStrategy::Cluster => "cluster_fold",
    };

    let folds: Vec<(FoldSummary, Vec<CvRecord>)> = groups
        .par_iter()
        .enumerate()
        .map(|(fold_id, held)| {
            let train: Vec<usize> = (0..samples.len()).filter(|i| !held.contains(i)).collect();
            let fold_seed = match strategy {
                CvStrategy::Stand => seeds::derive_keyed(seed, label, &samples[held[0]].stand_id),
                CvStrategy::Cluster => seeds::derive(seed, label, fold_id as u64),
            };
            let model = fit_calibrated(&data.subset(&train), variable_set, params, fold_seed)?;
            let records = held
                .iter()
                .map(|&i| CvRecord {
                    stand_id: samples[i].stand_id.clone(),
                    fold_id,
                    observed: data.response[i],
                    predicted: model.predict(&data.rows[i]),
                })
                .collect();
            let summary = FoldSummary {
                fold_id,
                held_out: held.iter().map(|&i| samples[i].stand_id.clone()).collect(),
                n_train: train.len(),
                calibration: model.calibration,
                train_ids: train.iter().map(|&i| samples[i].stand_id.clone()).collect(),
            };
            Ok((summary, records))
        })
        .collect::<Result<_, LearnError>>()?;

    let mut records: Vec<CvRecord> = folds.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    records.sort_by(|a, b| a.stand_id.cmp(&b.stand_id));
    let observed: Vec<f64> = records.iter().map(|r| r.observed).collect();
    let predicted: Vec<f64> = records.iter().map(|r| r.predicted).collect();
    let metrics = compute_metrics(&observed, &predicted)?;

    let (_, importance) = fit_full_model(&data, variable_set, params, seed)?;

    Ok(CvReport {
        strategy,
        variable_set,
        seed,
        ntree: params.ntree,
        nodesize: params.nodesize,
        records,
        metrics,
        importance,
        folds: folds.into_iter().map(|(f, _)| f).collect(),
    })
}
