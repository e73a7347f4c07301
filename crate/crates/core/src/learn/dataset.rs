use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::stands::{is_categorical, StandSample, VariableSet, PREDICTORS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Categorical,
}

/// Row-major training table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub kinds: Vec<VarKind>,
    pub rows: Vec<Vec<f64>>,
    pub response: Vec<f64>,
}

impl Dataset {
    pub fn new(
        names: Vec<String>,
        kinds: Vec<VarKind>,
        rows: Vec<Vec<f64>>,
        response: Vec<f64>,
    ) -> Result<Dataset, LearnError> {
        let d = Dataset {
            names,
            kinds,
            rows,
            response,
        };
        d.validate()?;
        Ok(d)
    }

    /// Continuous predictors only.
    pub fn continuous(names: &[&str], rows: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Dataset, LearnError> {
        Dataset::new(
            names.iter().map(|s| s.to_string()).collect(),
            vec![VarKind::Continuous; names.len()],
            rows,
            response,
        )
    }

    /// Columns of `set` taken from the stand samples.
    pub fn from_samples(samples: &[StandSample], set: VariableSet) -> Result<Dataset, LearnError> {
        let names = set.names();
        let idx: Vec<usize> = names
            .iter()
            .map(|n| PREDICTORS.iter().position(|p| p == n).expect("known predictor"))
            .collect();
        Dataset::new(
            names.iter().map(|s| s.to_string()).collect(),
            names
                .iter()
                .map(|n| if is_categorical(n) { VarKind::Categorical } else { VarKind::Continuous })
                .collect(),
            samples
                .iter()
                .map(|s| idx.iter().map(|&i| s.predictors[i]).collect())
                .collect(),
            samples.iter().map(|s| s.br_vol).collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
            response: rows.iter().map(|&i| self.response[i]).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if self.rows.is_empty() {
            return Err(LearnError::EmptyInput);
        }
        if self.names.is_empty() || self.names.len() != self.kinds.len() {
            return Err(LearnError::Data("need at least one predictor with a kind".into()));
        }
        if self.response.len() != self.rows.len() {
            return Err(LearnError::Data(format!(
                "{} responses for {} rows",
                self.response.len(),
                self.rows.len()
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.names.len() {
                return Err(LearnError::Data(format!("row {i} has {} values", row.len())));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(LearnError::Data(format!("row {i}, {}: non-finite value", self.names[j])));
                }
                if self.kinds[j] == VarKind::Categorical && v.fract() != 0.0 {
                    return Err(LearnError::Data(format!("row {i}, {}: category {v} is not an integer", self.names[j])));
                }
            }
            if !self.response[i].is_finite() {
                return Err(LearnError::Data(format!("row {i}: non-finite response")));
            }
        }
        Ok(())
    }
}
