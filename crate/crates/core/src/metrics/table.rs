use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fmt_opt, thresholded_metrics, MetricsReport};
use crate::actuator::{predict_batch12, ActuatorCoeffs, NUM_JOINTS};
use crate::log::TrajectoryLog;

/// Anything that predicts next-step joint torque from a log.
pub trait TorquePredictor: Sync {
    fn label(&self) -> String;

    /// Predicted and measured next-step torques (N·m) for every 1 ms record
    /// pair and every joint, pair-major.
    fn predict_log(&self, log: &TrajectoryLog) -> Result<(Vec<f64>, Vec<f64>), String>;
}

/// The analytical model with one coefficient set per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPredictor {
    pub coeffs: Vec<ActuatorCoeffs>,
}

impl TorquePredictor for AnalyticPredictor {
    fn label(&self) -> String {
        "Actuator model".to_string()
    }

    fn predict_log(&self, log: &TrajectoryLog) -> Result<(Vec<f64>, Vec<f64>), String> {
        let mut pred = Vec::new();
        let mut actual = Vec::new();
        for t in log.step_pairs() {
            let out = predict_batch12(&self.coeffs, &log.records[t].joints).map_err(|e| e.to_string())?;
            pred.extend_from_slice(&out);
            actual.extend(log.records[t + 1].joints.iter().map(|s| s.tau));
        }
        if pred.is_empty() {
            return Err("log has no 1 ms-spaced record pairs".into());
        }
        debug_assert_eq!(pred.len() % NUM_JOINTS, 0);
        Ok((pred, actual))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Cell {
    Ok(MetricsReport),
    Failed { model: String, dataset: String, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3 {
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    /// `cells[model][dataset]`.
    pub cells: Vec<Vec<Cell>>,
}

impl Table3 {
    pub fn cell(&self, model: &str, dataset: &str) -> Option<&Cell> {
        let m = self.models.iter().position(|x| x == model)?;
        let d = self.datasets.iter().position(|x| x == dataset)?;
        Some(&self.cells[m][d])
    }

    /// Models as rows, one RMSE / RMSE>th / MAPE>th column group per dataset.
    pub fn to_text(&self) -> String {
        let w = 10;
        let name_w = self.models.iter().map(|m| m.len()).max().unwrap_or(5).max(5);
        let group = 3 * (w + 1) - 1;
        let mut out = String::new();
        let _ = write!(out, "{:name_w$} ", "");
        for d in &self.datasets {
            let _ = write!(out, "| {d:^group$} ");
        }
        out.push('\n');
        let _ = write!(out, "{:name_w$} ", "model");
        for _ in &self.datasets {
            let _ = write!(out, "| {:>w$} {:>w$} {:>w$} ", "RMSE", "RMSE>th", "MAPE>th%");
        }
        out.push('\n');
        for (m, row) in self.models.iter().zip(&self.cells) {
            let _ = write!(out, "{m:name_w$} ");
            for cell in row {
                match cell {
                    Cell::Ok(r) => {
                        let _ = write!(
                            out,
                            "| {:>w$.3} {:>w$} {:>w$} ",
                            r.rmse_all,
                            fmt_opt(r.rmse_thresh, 3),
                            fmt_opt(r.mape_thresh, 2)
                        );
                    }
                    Cell::Failed { .. } => {
                        let _ = write!(out, "| {:>w$} {:>w$} {:>w$} ", "failed", "failed", "failed");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// One line per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,dataset,status,rmse_all,rmse_thresh,mape_thresh,n_total,n_thresh,error\n");
        for row in &self.cells {
            for cell in row {
                match cell {
                    Cell::Ok(r) => {
                        let _ = writeln!(
                            out,
                            "{},{},ok,{:e},{},{},{},{},",
                            csv_field(&r.model),
                            csv_field(&r.dataset),
                            r.rmse_all,
                            r.rmse_thresh.map_or("undefined".into(), |v| format!("{v:e}")),
                            r.mape_thresh.map_or("undefined".into(), |v| format!("{v:e}")),
                            r.n_total,
                            r.n_thresh
                        );
                    }
                    Cell::Failed { model, dataset, error } => {
                        let _ = writeln!(
                            out,
                            "{},{},failed,,,,,,{}",
                            csv_field(model),
                            csv_field(dataset),
                            csv_field(error)
                        );
                    }
                }
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Scores every model on every dataset; cells are computed in parallel.
pub fn table3_report(models: &[&dyn TorquePredictor], logs: &[(&str, &TrajectoryLog)], threshold: f64) -> Table3 {
    let cells = models
        .par_iter()
        .map(|model| {
            logs.par_iter()
                .map(|(name, log)| {
                    let scored = model.predict_log(log).and_then(|(p, a)| {
                        thresholded_metrics(&p, &a, threshold).map_err(|e| e.to_string())
                    });
                    match scored {
                        Ok(r) => Cell::Ok(MetricsReport { model: model.label(), dataset: name.to_string(), ..r }),
                        Err(error) => Cell::Failed { model: model.label(), dataset: name.to_string(), error },
                    }
                })
                .collect()
        })
        .collect();
    Table3 {
        models: models.iter().map(|m| m.label()).collect(),
        datasets: logs.iter().map(|(n, _)| n.to_string()).collect(),
        cells,
    }
}
