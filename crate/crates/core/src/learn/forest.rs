use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::TreeBuilder;
use super::{Dataset, LearnError, Tree, VarKind, DEFAULT_NODESIZE, DEFAULT_NTREE};
use crate::seeds;

/// Variables tried per split: a third of the predictors, rounded up.
pub fn mtry_for(p: usize) -> usize {
    p.div_ceil(3).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub ntree: usize,
    pub nodesize: usize,
    /// `None` selects [`mtry_for`] of the predictor count.
    pub mtry: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            ntree: DEFAULT_NTREE,
            nodesize: DEFAULT_NODESIZE,
            mtry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarMeta {
    pub name: String,
    pub kind: VarKind,
    /// Training categories, empty for continuous variables.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub codes: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub ntree: usize,
    pub nodesize: usize,
    pub mtry: usize,
    pub seed: u64,
    pub n_train: usize,
    pub variables: Vec<VarMeta>,
    pub trees: Vec<Tree>,
}

pub fn fit_random_forest(data: &Dataset, params: &ForestParams, seed: u64) -> Result<Forest, LearnError> {
    data.validate()?;
    let n = data.n_rows();
    let p = data.n_vars();
    if n < 2 {
        return Err(LearnError::Data("need at least 2 rows".into()));
    }
    if params.ntree == 0 || params.nodesize == 0 {
        return Err(LearnError::Data("ntree and nodesize must be positive".into()));
    }
    let mtry = params.mtry.unwrap_or_else(|| mtry_for(p));
    if mtry == 0 || mtry > p {
        return Err(LearnError::Data(format!("mtry {mtry} outside 1..={p}")));
    }
    let trees: Vec<Tree> = (0..params.ntree)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::stream(seed, "bootstrap", t as u64);
            let bag: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
            TreeBuilder::new(data, params.nodesize, mtry, &mut rng).grow(bag)
        })
        .collect();
    let variables = data
        .names
        .iter()
        .zip(&data.kinds)
        .enumerate()
        .map(|(j, (name, &kind))| {
            let mut codes: Vec<i64> = match kind {
                VarKind::Continuous => Vec::new(),
                VarKind::Categorical => data.rows.iter().map(|r| r[j].round() as i64).collect(),
            };
            codes.sort_unstable();
            codes.dedup();
            VarMeta {
                name: name.clone(),
                kind,
                codes,
            }
        })
        .collect();
    Ok(Forest {
        ntree: params.ntree,
        nodesize: params.nodesize,
        mtry,
        seed,
        n_train: n,
        variables,
        trees,
    })
}

impl Forest {
    /// Mean of the tree predictions, summed in tree order.
    pub fn predict(&self, row: &[f64]) -> f64 {
        assert_eq!(row.len(), self.variables.len(), "row width");
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OobPrediction {
    pub value: f64,
    /// Trees that did not see the row.
    pub n_trees: usize,
    /// False when every tree saw the row; `value` is then the full-forest
    /// prediction.
    pub covered: bool,
}

/// Out-of-bag prediction for each training row of `data`.
pub fn oob_predict(forest: &Forest, data: &Dataset) -> Vec<OobPrediction> {
    assert_eq!(data.n_rows(), forest.n_train, "forest was trained on a different table");
    (0..data.n_rows())
        .into_par_iter()
        .map(|i| {
            let row = &data.rows[i];
            let (mut sum, mut k) = (0.0, 0usize);
            for t in &forest.trees {
                if !t.in_bag(i) {
                    sum += t.predict(row);
                    k += 1;
                }
            }
            if k == 0 {
                OobPrediction {
                    value: forest.predict(row),
                    n_trees: 0,
                    covered: false,
                }
            } else {
                OobPrediction {
                    value: sum / k as f64,
                    n_trees: k,
                    covered: true,
                }
            }
        })
        .collect()
}
