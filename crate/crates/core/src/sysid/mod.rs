//! Per-joint least-squares identification of the actuator coefficients.
//!
//! The next-torque model is linear in `k1..k4`:
//!
//! ```text
//! τ_{t+1} − τ_t = k1·R²Δq − k2·τ − k3·R²q̇ + k4·R·Δq·max(−τ·sgn(Δq), 0)
//! ```
//!
//! so each joint's log reduces to an ordinary least-squares problem.

mod lstsq;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lstsq::{least_squares, LstsqSolution, RankDeficient};

use crate::actuator::{impact_term, ActuatorCoeffs, NUM_JOINTS};
use crate::log::{is_step, TrajectoryLog};

pub const COLUMN_NAMES: [&str; 4] = ["stiffness", "decay", "viscous", "impact"];

/// Largest k2 the fit will return; keeps `1 − k2` bounded away from zero.
pub const K2_MAX: f64 = 0.999;

#[derive(Debug, Error)]
pub enum SysidError {
    #[error("joint {joint}: insufficient excitation in column(s) {}", columns.join(", "))]
    InsufficientExcitation { joint: usize, columns: Vec<&'static str> },
    #[error("{0}")]
    Contract(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    /// Rows of `[R²Δq, −τ, −R²q̇, R·Δq·max(−τ·sgn(Δq), 0)]`.
    pub features: Vec<[f64; 4]>,
    /// `τ_{t+1} − τ_t` (N·m).
    pub targets: Vec<f64>,
    pub joint_id: usize,
    pub radius: f64,
    /// Consecutive pairs dropped because their spacing was not 1 ms.
    pub skipped_gaps: usize,
}

impl RegressionProblem {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Share of rows on the impact branch.
    pub fn impact_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.features.iter().filter(|r| r[3] != 0.0).count() as f64 / self.len() as f64
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }
}

/// One regression row for a single sample.
pub fn regression_row(radius: f64, q: f64, q_des: f64, qd: f64, tau: f64) -> [f64; 4] {
    let dq = q_des - q;
    let r2 = radius * radius;
    [r2 * dq, -tau, -r2 * qd, radius * impact_term(dq, tau)]
}

/// Builds the regression for one joint from every 1 ms-spaced pair of records.
pub fn build_regression(log: &TrajectoryLog, radius: f64, joint_id: usize) -> Result<RegressionProblem, SysidError> {
    if joint_id >= NUM_JOINTS {
        return Err(SysidError::Contract(format!("joint_id {joint_id} out of range")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(SysidError::Contract(format!("R must be > 0, got {radius}")));
    }
    if log.len() < 2 {
        return Err(SysidError::Contract(format!("need at least 2 records, got {}", log.len())));
    }
    let mut features = Vec::with_capacity(log.len() - 1);
    let mut targets = Vec::with_capacity(log.len() - 1);
    let mut skipped_gaps = 0;
    for pair in log.records.windows(2) {
        if !is_step(pair[0].t, pair[1].t) {
            skipped_gaps += 1;
            continue;
        }
        let s = &pair[0].joints[joint_id];
        features.push(regression_row(radius, s.q, s.q_des, s.qd, s.tau));
        targets.push(pair[1].joints[joint_id].tau - s.tau);
    }
    Ok(RegressionProblem { features, targets, joint_id, radius, skipped_gaps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// Ridge penalty on the unit-RMS scaled columns; 0 is plain OLS.
    #[serde(default)]
    pub ridge: f64,
    /// Minimum share of impact-branch rows for k4 to be fitted.
    #[serde(default = "default_min_impact_fraction")]
    pub min_impact_fraction: f64,
    /// Columns whose scaled `|R_jj|/sqrt(N)` falls below this are rank deficient.
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn default_min_impact_fraction() -> f64 {
    0.01
}

fn default_rank_tol() -> f64 {
    1e-8
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { ridge: 0.0, min_impact_fraction: default_min_impact_fraction(), rank_tol: default_rank_tol() }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<(), SysidError> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(SysidError::Contract(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        if !(0.0..=1.0).contains(&self.min_impact_fraction) {
            return Err(SysidError::Contract("min_impact_fraction must be in [0, 1]".into()));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol.is_finite()) {
            return Err(SysidError::Contract("rank_tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub joint_id: usize,
    pub rows: usize,
    pub skipped_gaps: usize,
    /// Raw least-squares estimates before clamping; k4 is 0 when unidentified.
    pub raw: [f64; 4],
    /// `None` for a column that was not fitted.
    pub std_errors: [Option<f64>; 4],
    /// RMS of `target − features·k` with the returned coefficients (N·m).
    pub residual_rms: f64,
    /// RMS of the targets, for scale.
    pub target_rms: f64,
    pub impact_fraction: f64,
    pub k4_identified: bool,
    pub warnings: Vec<String>,
}

/// Fits `k1..k4` to one joint's regression problem.
pub fn fit_coefficients(prob: &RegressionProblem, opts: &FitOptions) -> Result<(ActuatorCoeffs, FitReport), SysidError> {
    opts.validate()?;
    let n = prob.len();
    if n < 4 {
        return Err(SysidError::Contract(format!("joint {}: need at least 4 rows, got {n}", prob.joint_id)));
    }
    if prob.features.iter().flatten().chain(&prob.targets).any(|v| !v.is_finite()) {
        return Err(SysidError::Contract(format!("joint {}: non-finite regression data", prob.joint_id)));
    }
    let mut warnings = Vec::new();
    let impact_fraction = prob.impact_fraction();
    let k4_identified = impact_fraction >= opts.min_impact_fraction && impact_fraction > 0.0;
    if !k4_identified {
        warnings.push(format!(
            "k4 unidentified: {:.2}% impact-branch rows (< {:.2}%), k4 set to 0",
            100.0 * impact_fraction,
            100.0 * opts.min_impact_fraction
        ));
    }
    let used: Vec<usize> = if k4_identified { vec![0, 1, 2, 3] } else { vec![0, 1, 2] };
    let columns: Vec<Vec<f64>> = used.iter().map(|&j| prob.column(j)).collect();
    let sol = least_squares(&columns, &prob.targets, opts.ridge, opts.rank_tol).map_err(|RankDeficient(cols)| {
        SysidError::InsufficientExcitation {
            joint: prob.joint_id,
            columns: cols.iter().map(|&i| COLUMN_NAMES[used[i]]).collect(),
        }
    })?;

    let mut raw = [0.0; 4];
    let mut std_errors = [None; 4];
    for (i, &j) in used.iter().enumerate() {
        raw[j] = sol.coef[i];
        std_errors[j] = Some(sol.std_errors[i]);
    }

    let mut k = raw;
    for j in [0, 2, 3] {
        if k[j] < 0.0 {
            warnings.push(format!("k{} = {:.6e} is negative, clamped to 0", j + 1, k[j]));
            k[j] = 0.0;
        }
    }
    if !(0.0..=K2_MAX).contains(&k[1]) {
        warnings.push(format!("k2 = {:.6e} outside [0, {K2_MAX}], clamped", k[1]));
        k[1] = k[1].clamp(0.0, K2_MAX);
    }

    let coeffs = ActuatorCoeffs::new(k[0], k[1], k[2], k[3], prob.radius)
        .map_err(|e| SysidError::Contract(format!("joint {}: {e}", prob.joint_id)))?;
    let residual_rms = rms(prob.features.iter().zip(&prob.targets).map(|(r, y)| y - dot4(r, &k)));
    let target_rms = rms(prob.targets.iter().copied());
    let report = FitReport {
        joint_id: prob.joint_id,
        rows: n,
        skipped_gaps: prob.skipped_gaps,
        raw,
        std_errors,
        residual_rms,
        target_rms,
        impact_fraction,
        k4_identified,
        warnings,
    };
    Ok((coeffs, report))
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Fits all twelve joints in parallel. `radii` gives R per joint.
pub fn fit_all(
    log: &TrajectoryLog,
    radii: &[f64],
    opts: &FitOptions,
) -> Result<Vec<(ActuatorCoeffs, FitReport)>, SysidError> {
    if radii.len() != NUM_JOINTS {
        return Err(SysidError::Contract(format!("expected {NUM_JOINTS} radii, got {}", radii.len())));
    }
    (0..NUM_JOINTS)
        .into_par_iter()
        .map(|j| fit_coefficients(&build_regression(log, radii[j], j)?, opts))
        .collect()
}

/// Plain-text residual table, one line per joint.
pub fn report_table(fits: &[(ActuatorCoeffs, FitReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5} {:>12} {:>12} {:>12} {:>12} {:>10} {:>10} {:>8}  notes",
        "joint", "k1", "k2", "k3", "k4", "resid_rms", "target_rms", "impact%"
    );
    for (c, r) in fits {
        let _ = writeln!(
            out,
            "{:>5} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>10.4} {:>10.4} {:>8.2}  {}",
            r.joint_id,
            c.k1,
            c.k2,
            c.k3,
            c.k4,
            r.residual_rms,
            r.target_rms,
            100.0 * r.impact_fraction,
            r.warnings.join("; ")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuator::JointSnapshot;
    use crate::log::{LogRecord, LOG_DT};

    fn log_for_joint0(samples: &[(f64, f64, f64, f64)]) -> TrajectoryLog {
        let records = samples
            .iter()
            .enumerate()
            .map(|(i, &(q, q_des, qd, tau))| {
                let mut joints = [JointSnapshot::default(); NUM_JOINTS];
                joints[0] = JointSnapshot::new(q, q_des, qd, tau);
                LogRecord { t: i as f64 * LOG_DT, joints, reference: None }
            })
            .collect();
        TrajectoryLog::new(records).unwrap()
    }

    #[test]
    fn hand_rows() {
        let row = regression_row(0.05, 1.0, 1.01, 0.1, 100.0);
        let expect = [2.5e-5, -100.0, -2.5e-4, 0.0];
        for (a, b) in row.iter().zip(expect) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12), "{row:?}");
        }
        let row = regression_row(0.05, 1.0, 1.01, 0.1, -100.0);
        assert!((row[3] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn one_row_per_pair_and_gaps_skipped() {
        let samples: Vec<_> = (0..50).map(|i| (0.0, 0.01 * i as f64, 0.0, i as f64)).collect();
        let mut log = log_for_joint0(&samples);
        let prob = build_regression(&log, 0.05, 0).unwrap();
        assert_eq!((prob.len(), prob.skipped_gaps), (49, 0));
        for r in log.records.iter_mut().skip(20) {
            r.t += 5.0 * LOG_DT;
        }
        let prob = build_regression(&log, 0.05, 0).unwrap();
        assert_eq!((prob.len(), prob.skipped_gaps), (48, 1));
    }

    #[test]
    fn constant_log_lacks_excitation() {
        let log = log_for_joint0(&vec![(0.0, 0.0, 0.0, 0.0); 100]);
        let prob = build_regression(&log, 0.05, 0).unwrap();
        match fit_coefficients(&prob, &FitOptions::default()) {
            Err(SysidError::InsufficientExcitation { columns, .. }) => {
                assert_eq!(columns, vec!["stiffness", "decay", "viscous"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_impact_rows_leaves_k4_unidentified() {
        // τ always pushes with Δq, so the impact feature is identically zero
        let k = ActuatorCoeffs::new(8000.0, 0.05, 40.0, 3.0, 0.05).unwrap();
        let mut tau = 10.0;
        let mut samples = Vec::new();
        for i in 0..400 {
            let t = i as f64 * 1e-3;
            let (q, qd) = (0.1 * (9.0 * t).sin(), 0.9 * (9.0 * t).cos());
            let q_des = q + 0.02 + 0.01 * (23.0 * t).sin();
            samples.push((q, q_des, qd, tau));
            tau = crate::actuator::predict_torque_next(&k, &JointSnapshot::new(q, q_des, qd, tau)).unwrap();
            assert!(tau > 0.0);
        }
        let prob = build_regression(&log_for_joint0(&samples), 0.05, 0).unwrap();
        assert_eq!(prob.impact_fraction(), 0.0);
        let (c, report) = fit_coefficients(&prob, &FitOptions::default()).unwrap();
        assert!(!report.k4_identified);
        assert_eq!(c.k4, 0.0);
        assert_eq!(report.std_errors[3], None);
        assert!(report.warnings[0].contains("unidentified"));
        assert!((c.k1 - 8000.0).abs() < 1e-6 * 8000.0, "{c:?}");
    }

    #[test]
    fn negative_estimates_are_clamped_with_warning() {
        // targets generated with a negative viscous coefficient
        let rows: Vec<[f64; 4]> = (0..200)
            .map(|i| {
                let x = i as f64;
                regression_row(0.05, 0.0, (0.3 * x).sin(), (0.7 * x).cos(), 50.0 * (0.11 * x).sin())
            })
            .collect();
        let truth = [1000.0, 0.1, -50.0, 2.0];
        let prob = RegressionProblem {
            targets: rows.iter().map(|r| dot4(r, &truth)).collect(),
            features: rows,
            joint_id: 0,
            radius: 0.05,
            skipped_gaps: 0,
        };
        let (c, report) = fit_coefficients(&prob, &FitOptions::default()).unwrap();
        assert!((report.raw[2] + 50.0).abs() < 1e-6);
        assert_eq!(c.k3, 0.0);
        assert!(report.warnings.iter().any(|w| w.starts_with("k3")));
    }
}
