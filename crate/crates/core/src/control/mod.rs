//! Torque and position PID loops around the oracle rig.

mod closed_loop;
mod contrast;
mod phase;
mod pid;
mod tune;

use thiserror::Error;

pub use closed_loop::{run_closed_loop, sample_reference, LoopConfig, LoopMode, LoopRecord, LoopRun, LoopStatus, RigSim};
pub(crate) use closed_loop::drive;
pub use contrast::{mode_contrast, ModeContrast, CONTRAST_FREQS_HZ};
pub use phase::phase_lag;
pub use pid::{pid_step, PidGains, PidState};
pub use tune::{position_step, settling_time, tune_position_kp};

use crate::oracle::OracleError;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("config error: {0}")]
    Config(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}
