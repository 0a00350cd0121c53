//! Dual-rate closed loops around the oracle rig.
//!
//! The reference is sampled at the command rate and held (zero-order hold)
//! across the inner-loop ticks; the PID and the physics run at the inner rate.

use serde::{Deserialize, Serialize};

use super::pid::{pid_step, PidGains, PidState};
use super::ControlError;
use crate::oracle::{step_rig, CylinderParams, RigParams, RigState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    /// Closes the loop on the joint angle error.
    Position,
    /// Closes the loop on the joint torque error.
    Torque,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    pub mode: LoopMode,
    #[serde(default = "default_inner_rate")]
    pub inner_rate_hz: u32,
    #[serde(default = "default_command_rate")]
    pub command_rate_hz: u32,
    pub gains: PidGains,
    /// Joint speed beyond which a run is declared diverged (rad/s).
    #[serde(default = "default_qd_bound")]
    pub qd_bound: f64,
}

fn default_inner_rate() -> u32 {
    1000
}

fn default_command_rate() -> u32 {
    100
}

fn default_qd_bound() -> f64 {
    50.0
}

impl LoopConfig {
    /// Position loop with gains tuned on the default rig.
    pub fn default_position() -> Self {
        Self {
            mode: LoopMode::Position,
            inner_rate_hz: 1000,
            command_rate_hz: 100,
            gains: PidGains { kp: 1e-3, ki: 0.0, kd: 0.0, i_limit: 0.05, u_limit: 5e-4 },
            qd_bound: default_qd_bound(),
        }
    }

    /// Torque loop for the default rig.
    pub fn default_torque() -> Self {
        Self {
            mode: LoopMode::Torque,
            inner_rate_hz: 1000,
            command_rate_hz: 100,
            gains: PidGains { kp: 5e-7, ki: 0.0, kd: 0.0, i_limit: 100.0, u_limit: 5e-4 },
            qd_bound: default_qd_bound(),
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        self.gains.validate()?;
        if self.inner_rate_hz == 0 || self.command_rate_hz == 0 {
            return Err(ControlError::Config("loop rates must be > 0".into()));
        }
        if !self.inner_rate_hz.is_multiple_of(self.command_rate_hz) {
            return Err(ControlError::Config(format!(
                "inner rate {} Hz is not an integer multiple of command rate {} Hz",
                self.inner_rate_hz, self.command_rate_hz
            )));
        }
        if !(self.qd_bound > 0.0) {
            return Err(ControlError::Config("qd_bound must be > 0".into()));
        }
        Ok(())
    }

    /// Inner ticks per command sample.
    pub fn hold_steps(&self) -> usize {
        (self.inner_rate_hz / self.command_rate_hz) as usize
    }

    pub fn inner_dt(&self) -> f64 {
        1.0 / self.inner_rate_hz as f64
    }
}

/// Oracle rig plus the number of integrator substeps per inner tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigSim {
    pub rig: RigParams,
    pub cylinder: CylinderParams,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_substeps() -> usize {
    10
}

impl Default for RigSim {
    fn default() -> Self {
        Self { rig: RigParams::default(), cylinder: CylinderParams::default(), substeps: default_substeps() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum LoopStatus {
    Completed,
    Diverged { step: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopRecord {
    pub t: f64,
    pub q: f64,
    pub qd: f64,
    pub tau: f64,
    /// Held reference (rad in position mode, N·m in torque mode).
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopRun {
    pub mode: LoopMode,
    pub dt: f64,
    pub records: Vec<LoopRecord>,
    pub status: LoopStatus,
}

impl LoopRun {
    pub fn reference(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reference).collect()
    }

    /// The channel the loop regulates: `q` in position mode, `τ` in torque mode.
    pub fn measured(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| match self.mode {
                LoopMode::Position => r.q,
                LoopMode::Torque => r.tau,
            })
            .collect()
    }

    pub fn diverged(&self) -> bool {
        matches!(self.status, LoopStatus::Diverged { .. })
    }
}

/// What the driver hands to its observer before each inner step.
pub(crate) struct TickView<'a> {
    pub step: usize,
    pub state: &'a RigState,
    pub reference: f64,
}

/// Runs the inner loop for `n_steps` ticks over command-rate reference samples.
///
/// `observe` sees the state before each step is taken.
pub(crate) fn drive(
    cfg: &LoopConfig,
    sim: &RigSim,
    initial: RigState,
    command: &[f64],
    n_steps: usize,
    external_torque: impl Fn(usize) -> f64,
    mut observe: impl FnMut(TickView<'_>),
) -> Result<(RigState, LoopStatus), ControlError> {
    let hold = cfg.hold_steps();
    if command.len() * hold < n_steps {
        return Err(ControlError::Contract(format!(
            "reference has {} samples, {} needed for {n_steps} steps",
            command.len(),
            n_steps.div_ceil(hold)
        )));
    }
    let dt = cfg.inner_dt();
    let mut state = initial;
    let mut pid = PidState::default();
    for k in 0..n_steps {
        if !(state.qd.abs() <= cfg.qd_bound) || !state.f.is_finite() {
            return Ok((state, LoopStatus::Diverged { step: k }));
        }
        let reference = command[k / hold];
        observe(TickView { step: k, state: &state, reference });
        let measured = match cfg.mode {
            LoopMode::Position => state.q,
            LoopMode::Torque => state.tau(&sim.rig),
        };
        let (u, next_pid) = pid_step(&cfg.gains, reference - measured, pid, dt);
        pid = next_pid;
        state = step_rig(&sim.rig, &sim.cylinder, &state, u, external_torque(k), dt, sim.substeps)?;
    }
    Ok((state, LoopStatus::Completed))
}

/// Samples `reference(t)` at the command rate for a run of `duration` seconds.
pub fn sample_reference(cfg: &LoopConfig, reference: impl Fn(f64) -> f64, duration: f64) -> Vec<f64> {
    let n_cmd = (duration * cfg.command_rate_hz as f64).round() as usize + 1;
    let cdt = 1.0 / cfg.command_rate_hz as f64;
    (0..n_cmd).map(|i| reference(i as f64 * cdt)).collect()
}

/// Runs one rig in closed loop against a reference trajectory.
pub fn run_closed_loop(
    cfg: &LoopConfig,
    sim: &RigSim,
    initial: RigState,
    reference: impl Fn(f64) -> f64,
    duration: f64,
) -> Result<LoopRun, ControlError> {
    cfg.validate()?;
    sim.rig.validate(&sim.cylinder)?;
    sim.cylinder.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(ControlError::Contract(format!("duration must be > 0, got {duration}")));
    }
    let dt = cfg.inner_dt();
    let n_steps = (duration * cfg.inner_rate_hz as f64).round() as usize;
    let command = sample_reference(cfg, &reference, duration);
    let mut records = Vec::with_capacity(n_steps);
    let (_, status) = drive(cfg, sim, initial, &command, n_steps, |_| 0.0, |view| {
        records.push(LoopRecord {
            t: view.step as f64 * dt,
            q: view.state.q,
            qd: view.state.qd,
            tau: view.state.tau(&sim.rig),
            reference: view.reference,
        });
    })?;
    Ok(LoopRun { mode: cfg.mode, dt, records, status })
}
