//! Model file: one JSON object
//!
//! ```text
//! { "version": 1, "variable_set": "prior_to_harvest",
//!   "calibration": { "a": .., "b": .. },
//!   "forest": { "ntree", "nodesize", "mtry", "seed", "n_train",
//!               "variables": [ { "name", "kind", "codes"? } ],
//!               "trees": [ { "nodes": [ { "type": "leaf" | "threshold" | "categorical", .. } ],
//!                            "bag": [row, ..] } ] } }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CalibratedForest, LearnError};

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    #[serde(flatten)]
    model: CalibratedForest,
}

pub fn model_to_json(model: &CalibratedForest) -> String {
    serde_json::to_string(&ModelFile {
        version: MODEL_VERSION,
        model: model.clone(),
    })
    .expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<CalibratedForest, LearnError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| LearnError::Model(e.to_string()))?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == MODEL_VERSION as u64 => {}
        Some(v) => return Err(LearnError::Model(format!("unknown model version {v}, expected {MODEL_VERSION}"))),
        None => return Err(LearnError::Model("missing version field".into())),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| LearnError::Model(e.to_string()))?;
    Ok(file.model)
}

pub fn save_model(model: &CalibratedForest, path: impl AsRef<Path>) -> Result<(), LearnError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)).map_err(|source| LearnError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CalibratedForest, LearnError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LearnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{fit_calibrated, Dataset, ForestParams, VarKind};
    use crate::stands::VariableSet;

    fn model() -> CalibratedForest {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 4) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 0.5 + r[1]).collect();
        let d = Dataset::new(
            vec!["x".into(), "c".into()],
            vec![VarKind::Continuous, VarKind::Categorical],
            rows,
            y,
        )
        .unwrap();
        fit_calibrated(&d, VariableSet::PriorToHarvest, &ForestParams { ntree: 10, ..Default::default() }, 3).unwrap()
    }

    #[test]
    fn roundtrip() {
        let m = model();
        let text = model_to_json(&m);
        assert!(text.starts_with("{\"version\":1,"));
        assert_eq!(model_from_json(&text).unwrap(), m);
        assert_eq!(model_to_json(&model_from_json(&text).unwrap()), text);
    }

    #[test]
    fn unknown_version_fails() {
        let text = model_to_json(&model()).replacen("\"version\":1", "\"version\":2", 1);
        match model_from_json(&text) {
            Err(LearnError::Model(m)) => assert!(m.contains("unknown model version 2")),
            other => panic!("{other:?}"),
        }
        let text = model_to_json(&model()).replacen("\"version\":1,", "", 1);
        assert!(model_from_json(&text).is_err());
    }
}
