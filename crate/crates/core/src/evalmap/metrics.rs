use serde::{Deserialize, Serialize};

use super::EvalError;

/// Pooled accuracy of a set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub mean_obs: f64,
    pub rmse: f64,
    /// Mean of observed minus predicted; positive means underprediction.
    pub md: f64,
    /// Relative to `mean_obs`; absent when the observed mean is zero.
    pub rmse_pct: Option<f64>,
    pub md_pct: Option<f64>,
    /// `1 - MSE / s²`, with MSE over `n` and the sample variance over `n - 1`.
    pub pseudo_r2: f64,
}

pub fn compute_metrics(observed: &[f64], predicted: &[f64]) -> Result<MetricsReport, EvalError> {
    if observed.len() != predicted.len() {
        return Err(EvalError::Metrics(format!(
            "{} observed but {} predicted values",
            observed.len(),
            predicted.len()
        )));
    }
    let n = observed.len();
    if n < 2 {
        return Err(EvalError::Metrics(format!("need at least 2 values, got {n}")));
    }
    if let Some(i) = observed.iter().chain(predicted).position(|v| !v.is_finite()) {
        return Err(EvalError::Metrics(format!("non-finite value at position {}", i % n)));
    }
    let nf = n as f64;
    let mean_obs = observed.iter().sum::<f64>() / nf;
    let mut sq = 0.0;
    let mut dev = 0.0;
    let mut ss = 0.0;
    for (y, p) in observed.iter().zip(predicted) {
        sq += (y - p) * (y - p);
        dev += y - p;
        ss += (y - mean_obs) * (y - mean_obs);
    }
    if ss == 0.0 {
        return Err(EvalError::Metrics("observed values have zero variance".into()));
    }
    let mse = sq / nf;
    let rmse = mse.sqrt();
    let md = dev / nf;
    let pct = |v: f64| (mean_obs != 0.0).then(|| 100.0 * v / mean_obs);
    Ok(MetricsReport {
        n,
        mean_obs,
        rmse,
        md,
        rmse_pct: pct(rmse),
        md_pct: pct(md),
        pseudo_r2: 1.0 - mse / (ss / (nf - 1.0)),
    })
}
