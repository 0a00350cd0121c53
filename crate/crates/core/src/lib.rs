//! Hydraulic actuator modeling toolkit.
//!
//! * [`actuator`]: the analytical next-torque model and its batch predictor.
//! * [`oracle`]: nonlinear cylinder/valve/joint simulator used as ground truth.
//! * [`control`]: position and torque PID loops, phase-lag analysis.
//! * [`sysid`]: least-squares identification of the model coefficients.
//! * [`nn`]: MLP, LSTM and GRU baselines trained from scratch.
//! * [`metrics`]: RMSE/MAPE scoring, distribution analysis, latency benchmark.
//! * [`reward`]: locomotion reward terms and observation assembly.
//! * [`log`], [`config`], [`cli`]: file formats and the command-line front end.

pub mod actuator;
pub mod cli;
pub mod config;
pub mod control;
pub mod log;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod reward;
pub mod sysid;
