use ndarray::Array2;

use super::{NnError, TORQUE_SCALE};
use crate::actuator::{JointSnapshot, NUM_JOINTS};
use crate::log::{is_step, TrajectoryLog};

/// Per joint: `q_des − q`, `τ / 100`, `q̇`, previous-step `q_des − q`.
pub const FEATURES_PER_JOINT: usize = 4;

/// Input frames and next-step targets for one log.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `[N × 48]`, time-ordered.
    pub frames: Array2<f64>,
    /// `[N × 12]`, next-step torque divided by the torque scale.
    pub targets: Array2<f64>,
    /// Log index of the record each frame was built from.
    pub rows: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Joint-major 48-feature frame. Without a previous record the current
/// displacement stands in for the previous one.
pub fn frame_features(cur: &[JointSnapshot; NUM_JOINTS], prev: Option<&[JointSnapshot; NUM_JOINTS]>) -> [f64; 48] {
    let mut out = [0.0; NUM_JOINTS * FEATURES_PER_JOINT];
    for (j, s) in cur.iter().enumerate() {
        let dq = s.q_des - s.q;
        let prev_dq = prev.map_or(dq, |p| p[j].q_des - p[j].q);
        out[j * FEATURES_PER_JOINT..(j + 1) * FEATURES_PER_JOINT].copy_from_slice(&[dq, s.tau / TORQUE_SCALE, s.qd, prev_dq]);
    }
    out
}

/// One frame per 1 ms-spaced pair of records; the target is the second record's torque.
pub fn dataset_from_log(log: &TrajectoryLog) -> Result<Dataset, NnError> {
    let rows: Vec<usize> = log.step_pairs().collect();
    if rows.is_empty() {
        return Err(NnError::Contract("log has no 1 ms-spaced record pairs".into()));
    }
    let width = NUM_JOINTS * FEATURES_PER_JOINT;
    let mut frames = Array2::zeros((rows.len(), width));
    let mut targets = Array2::zeros((rows.len(), NUM_JOINTS));
    for (k, &t) in rows.iter().enumerate() {
        let rec = &log.records[t];
        let prev = (t > 0 && is_step(log.records[t - 1].t, rec.t)).then(|| &log.records[t - 1].joints);
        for (dst, v) in frames.row_mut(k).iter_mut().zip(frame_features(&rec.joints, prev)) {
            *dst = v;
        }
        for (dst, s) in targets.row_mut(k).iter_mut().zip(&log.records[t + 1].joints) {
            *dst = s.tau / TORQUE_SCALE;
        }
    }
    Ok(Dataset { frames, targets, rows })
}
