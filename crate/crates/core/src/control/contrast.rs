use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::closed_loop::{run_closed_loop, LoopConfig, LoopMode, RigSim};
use super::tune::{position_step, settling_time};
use super::ControlError;
use crate::oracle::RigState;

pub const CONTRAST_FREQS_HZ: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeContrast {
    /// `(frequency Hz, lag deg)` of the torque loop tracking a sine.
    pub torque_lag_deg: Vec<(f64, f64)>,
    pub torque_amplitude: f64,
    pub position_step: f64,
    /// 2% settling time of the position step; `None` if it never settles.
    pub position_settling_s: Option<f64>,
    pub position_diverged: bool,
}

/// Torque-loop sine tracking lag at each of `CONTRAST_FREQS_HZ` and the
/// position-loop step response on the same rig.
pub fn mode_contrast(torque: &LoopConfig, position: &LoopConfig, sim: &RigSim) -> Result<ModeContrast, ControlError> {
    if torque.mode != LoopMode::Torque || position.mode != LoopMode::Position {
        return Err(ControlError::Config("mode_contrast needs a torque loop and a position loop".into()));
    }
    let amplitude = 100.0;
    let torque_lag_deg = CONTRAST_FREQS_HZ
        .iter()
        .map(|&f| {
            let run = run_closed_loop(torque, sim, RigState::default(), |t| amplitude * (2.0 * PI * f * t).sin(), 6.0)?;
            if run.diverged() {
                return Err(ControlError::Contract(format!("torque loop diverged at {f} Hz")));
            }
            Ok((f, run.phase_lag(f)?))
        })
        .collect::<Result<Vec<_>, ControlError>>()?;
    let step = 0.2;
    let run = position_step(position, sim, 0.0, step, 1.0)?;
    Ok(ModeContrast {
        torque_lag_deg,
        torque_amplitude: amplitude,
        position_step: step,
        position_settling_s: settling_time(&run, 0.0, step, 0.02),
        position_diverged: run.diverged(),
    })
}
