//! Twelve-joint log synthesis: every joint runs its own rig under position PID
//! at 1 kHz while its target is updated at 100 Hz.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profile::CommandProfile;
use super::{CylinderParams, OracleError, RigParams, RigState};
use crate::actuator::{JointSnapshot, NUM_JOINTS};
use crate::control::{drive, LoopConfig, LoopMode, LoopStatus, RigSim};
use crate::log::{LogRecord, TrajectoryLog, LOG_DT};

/// Physical setup shared by every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSetup {
    pub cylinder: CylinderParams,
    /// One rig per joint, leg-major.
    pub rigs: Vec<RigParams>,
    pub position_loop: LoopConfig,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_substeps() -> usize {
    10
}

impl Default for SimSetup {
    fn default() -> Self {
        // hip roll, hip pitch, knee
        let roles = [(0.04, 4.0, 150.0), (0.06, 6.0, 250.0), (0.03, 3.0, 120.0)];
        let rigs = (0..NUM_JOINTS)
            .map(|j| {
                let (inertia, damping, gravity) = roles[j % 3];
                RigParams { inertia, damping, gravity_torque_amp: gravity, ..RigParams::default() }
            })
            .collect();
        Self {
            cylinder: CylinderParams::default(),
            rigs,
            position_loop: LoopConfig::default_position(),
            substeps: default_substeps(),
        }
    }
}

impl SimSetup {
    pub fn validate(&self) -> Result<(), OracleError> {
        self.cylinder.validate()?;
        if self.rigs.len() != NUM_JOINTS {
            return Err(OracleError::Config(format!("expected {NUM_JOINTS} rigs, got {}", self.rigs.len())));
        }
        for rig in &self.rigs {
            rig.validate(&self.cylinder)?;
        }
        if self.position_loop.mode != LoopMode::Position {
            return Err(OracleError::Config("log synthesis needs a position loop".into()));
        }
        self.position_loop.validate().map_err(|e| OracleError::Config(e.to_string()))?;
        if self.position_loop.inner_rate_hz != 1000 {
            return Err(OracleError::Config("log synthesis runs the inner loop at 1000 Hz".into()));
        }
        if self.substeps == 0 {
            return Err(OracleError::Config("substeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// External torque pulses standing in for foot strikes and other impacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactLoad {
    /// Mean pulse rate (Hz).
    pub rate_hz: f64,
    /// Peak torque (N·m); the sign sets the push direction.
    pub magnitude: f64,
    /// Pulse length (s).
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorNoise {
    /// Standard deviation on q (rad).
    #[serde(default)]
    pub q: f64,
    /// Standard deviation on q̇ (rad/s).
    #[serde(default)]
    pub qd: f64,
    /// Standard deviation on τ (N·m).
    #[serde(default)]
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_duration")]
    pub duration: f64,
    pub profile: CommandProfile,
    #[serde(default = "one")]
    pub gravity_scale: f64,
    #[serde(default = "one")]
    pub damping_scale: f64,
    #[serde(default = "one")]
    pub inertia_scale: f64,
    #[serde(default)]
    pub impacts: Option<ImpactLoad>,
    #[serde(default)]
    pub noise: SensorNoise,
    /// Mixed into the run seed so scenarios sharing a seed still differ.
    #[serde(default)]
    pub seed_offset: u64,
}

fn default_duration() -> f64 {
    20.0
}

fn one() -> f64 {
    1.0
}

impl Scenario {
    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(OracleError::Config(format!("scenario {}: duration must be > 0", self.name)));
        }
        self.profile.validate()?;
        for (n, v) in [("gravity_scale", self.gravity_scale), ("damping_scale", self.damping_scale)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(OracleError::Config(format!("scenario {}: {n} must be >= 0", self.name)));
            }
        }
        if !(self.inertia_scale.is_finite() && self.inertia_scale > 0.0) {
            return Err(OracleError::Config(format!("scenario {}: inertia_scale must be > 0", self.name)));
        }
        if let Some(imp) = &self.impacts {
            if !(imp.rate_hz > 0.0 && imp.duration > 0.0 && imp.magnitude.is_finite() && imp.duration.is_finite()) {
                return Err(OracleError::Config(format!("scenario {}: invalid impact load", self.name)));
            }
        }
        let n = &self.noise;
        if ![n.q, n.qd, n.tau].iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(OracleError::Config(format!("scenario {}: noise must be >= 0", self.name)));
        }
        Ok(())
    }

    fn scaled_rig(&self, rig: &RigParams) -> RigParams {
        RigParams {
            inertia: rig.inertia * self.inertia_scale,
            damping: rig.damping * self.damping_scale,
            gravity_torque_amp: rig.gravity_torque_amp * self.gravity_scale,
            ..*rig
        }
    }
}

// per-joint random streams
const STREAM_PROFILE: u64 = 0;
const STREAM_IMPACT: u64 = 1;
const STREAM_NOISE: u64 = 2;

fn joint_rng(seed: u64, joint: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(joint as u64 * 8 + purpose);
    rng
}

fn impact_torques(load: &ImpactLoad, n_steps: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; n_steps];
    let period = 1.0 / load.rate_hz;
    let width = (load.duration / LOG_DT).round().max(1.0) as usize;
    let mut start_t = rng.random_range(0.0..period);
    while ((start_t / LOG_DT) as usize) < n_steps {
        let k0 = (start_t / LOG_DT) as usize;
        let peak = load.magnitude * rng.random_range(0.5..1.0);
        for i in 0..width.min(n_steps - k0) {
            out[k0 + i] += peak * (PI * (i as f64 + 0.5) / width as f64).sin();
        }
        start_t += period * rng.random_range(0.5..1.5);
    }
    out
}

fn run_joint(setup: &SimSetup, scenario: &Scenario, joint: usize, seed: u64) -> Result<Vec<JointSnapshot>, OracleError> {
    let cfg = &setup.position_loop;
    let n_steps = (scenario.duration / LOG_DT).round() as usize;
    let n_ticks = n_steps.div_ceil(cfg.hold_steps());
    let command_dt = 1.0 / cfg.command_rate_hz as f64;
    let command = scenario.profile.command_ticks(joint, n_ticks, command_dt, &mut joint_rng(seed, joint, STREAM_PROFILE))?;
    let sim = RigSim { rig: scenario.scaled_rig(&setup.rigs[joint]), cylinder: setup.cylinder, substeps: setup.substeps };
    sim.rig.validate(&sim.cylinder)?;
    let ext = match &scenario.impacts {
        Some(load) => impact_torques(load, n_steps, &mut joint_rng(seed, joint, STREAM_IMPACT)),
        None => vec![0.0; n_steps],
    };
    let start_q = command[0].clamp(sim.rig.q_min, sim.rig.q_max);
    let mut noise_rng = joint_rng(seed, joint, STREAM_NOISE);
    let noise = &scenario.noise;
    let normal = |sd: f64| Normal::new(0.0, sd).map_err(|e| OracleError::Config(e.to_string()));
    let (nq, nqd, ntau) = (normal(noise.q)?, normal(noise.qd)?, normal(noise.tau)?);
    let mut snaps = Vec::with_capacity(n_steps);
    let (_, status) = drive(cfg, &sim, RigState::at_rest(&sim.rig, start_q), &command, n_steps, |k| ext[k], |view| {
        let s = view.state;
        let mut sample = |d: &Normal<f64>, sd: f64| if sd > 0.0 { d.sample(&mut noise_rng) } else { 0.0 };
        let q = s.q + sample(&nq, noise.q);
        let qd = s.qd + sample(&nqd, noise.qd);
        let tau = s.tau(&sim.rig) + sample(&ntau, noise.tau);
        snaps.push(JointSnapshot::new(q, view.reference, qd, tau));
    })
    .map_err(|e| OracleError::Config(e.to_string()))?;
    match status {
        LoopStatus::Completed => Ok(snaps),
        LoopStatus::Diverged { step } => Err(OracleError::Diverged { joint, step }),
    }
}

/// Synthesizes a 1 kHz twelve-joint log for `scenario`. Identical inputs give identical logs.
pub fn synthesize_log(setup: &SimSetup, scenario: &Scenario, seed: u64) -> Result<TrajectoryLog, OracleError> {
    setup.validate()?;
    scenario.validate()?;
    let run_seed = seed ^ scenario.seed_offset.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let per_joint: Vec<Vec<JointSnapshot>> =
        (0..NUM_JOINTS).into_par_iter().map(|j| run_joint(setup, scenario, j, run_seed)).collect::<Result<_, _>>()?;
    let n = per_joint[0].len();
    let records = (0..n)
        .map(|k| {
            let mut joints = [JointSnapshot::default(); NUM_JOINTS];
            for (j, s) in joints.iter_mut().enumerate() {
                *s = per_joint[j][k];
            }
            LogRecord { t: k as f64 * LOG_DT, joints, reference: None }
        })
        .collect();
    TrajectoryLog::new(records).map_err(|e| OracleError::Config(e.to_string()))
}
