//! Scoring protocol, torque/displacement distribution and latency benchmark.

mod latency;
mod quadrant;
mod table;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use latency::{bench_latency, replay_checksum, LatencyStats, TimingMode};
pub use quadrant::{quadrant_stats, Histogram2d, QuadrantStats};
pub use table::{table3_report, AnalyticPredictor, Cell, Table3, TorquePredictor};

/// Torque magnitude above which samples enter the thresholded metrics (N·m).
pub const DEFAULT_THRESHOLD: f64 = 50.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub dataset: String,
    /// RMSE over every pair (N·m).
    pub rmse_all: f64,
    /// RMSE over pairs with `|actual| > threshold`; `None` ("undefined") if there are none.
    pub rmse_thresh: Option<f64>,
    /// Mean absolute percentage error over the same pairs (%).
    pub mape_thresh: Option<f64>,
    pub n_total: usize,
    pub n_thresh: usize,
    pub threshold: f64,
}

/// RMSE over all pairs, and RMSE and MAPE over pairs whose actual torque exceeds `thresh` in magnitude.
pub fn thresholded_metrics(pred: &[f64], actual: &[f64], thresh: f64) -> Result<MetricsReport, MetricsError> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(MetricsError::Contract(format!(
            "need equal, non-empty lengths (pred {}, actual {})",
            pred.len(),
            actual.len()
        )));
    }
    if !(thresh >= 0.0) {
        return Err(MetricsError::Contract(format!("threshold must be >= 0, got {thresh}")));
    }
    let (mut sq_all, mut sq_th, mut pct, mut n_th) = (0.0, 0.0, 0.0, 0usize);
    for (&p, &a) in pred.iter().zip(actual) {
        let e = p - a;
        sq_all += e * e;
        if a.abs() > thresh {
            sq_th += e * e;
            pct += e.abs() / a.abs();
            n_th += 1;
        }
    }
    let n = pred.len();
    let (rmse_thresh, mape_thresh) =
        if n_th > 0 { (Some((sq_th / n_th as f64).sqrt()), Some(100.0 * pct / n_th as f64)) } else { (None, None) };
    Ok(MetricsReport {
        model: String::new(),
        dataset: String::new(),
        rmse_all: (sq_all / n as f64).sqrt(),
        rmse_thresh,
        mape_thresh,
        n_total: n,
        n_thresh: n_th,
        threshold: thresh,
    })
}

/// `value` with `digits` decimals, or `undefined`.
pub fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.digits$}"))
}
