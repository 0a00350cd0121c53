//! Ground-truth hydraulic simulator that stands in for the robot.

mod cylinder;
mod profile;
mod rig;
mod synth;

use thiserror::Error;

pub use cylinder::{flow_coefficients, step_cylinder, CylinderParams, CylinderState};
pub use profile::CommandProfile;
pub use rig::{step_rig, RigParams, RigState};
pub use synth::{synthesize_log, ImpactLoad, Scenario, SensorNoise, SimSetup};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("joint {joint} diverged at step {step}")]
    Diverged { joint: usize, step: usize },
}
