use serde::{Deserialize, Serialize};

use super::{fit_random_forest, ols, oob_predict, Dataset, Forest, ForestParams, LearnError};
use crate::stands::VariableSet;

/// Linear correction `a + b·prediction` of forest output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
}

impl Calibration {
    pub const IDENTITY: Calibration = Calibration { a: 0.0, b: 1.0 };

    /// Corrected value, truncated at zero.
    pub fn apply(&self, raw: f64) -> f64 {
        (self.a + self.b * raw).max(0.0)
    }
}

/// Regress observed on predicted. Predictions without variance fall back to
/// the observed mean with zero slope.
pub fn fit_calibration(predicted: &[f64], observed: &[f64]) -> Result<Calibration, LearnError> {
    if predicted.len() != observed.len() || predicted.len() < 2 {
        return Err(LearnError::Data(format!(
            "calibration needs at least 2 paired values, got {} and {}",
            predicted.len(),
            observed.len()
        )));
    }
    match ols(predicted, observed) {
        Some((a, b)) => Ok(Calibration { a, b }),
        None => {
            let mean = observed.iter().sum::<f64>() / observed.len() as f64;
            log::warn!("calibration fallback: predictions have no variance, a={mean} b=0");
            Ok(Calibration { a: mean, b: 0.0 })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedForest {
    pub variable_set: VariableSet,
    pub forest: Forest,
    pub calibration: Calibration,
}

impl CalibratedForest {
    pub fn predict_raw(&self, row: &[f64]) -> f64 {
        self.forest.predict(row)
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.calibration.apply(self.forest.predict(row))
    }
}

/// Fit the forest, then the calibration on its out-of-bag predictions.
pub fn fit_calibrated(
    data: &Dataset,
    variable_set: VariableSet,
    params: &ForestParams,
    seed: u64,
) -> Result<CalibratedForest, LearnError> {
    let forest = fit_random_forest(data, params, seed)?;
    let oob: Vec<f64> = oob_predict(&forest, data).iter().map(|o| o.value).collect();
    let calibration = fit_calibration(&oob, &data.response)?;
    Ok(CalibratedForest {
        variable_set,
        forest,
        calibration,
    })
}
