//! Locomotion reward terms and the policy observation vector.
//!
//! Each term is computed exactly as its expression is written; penalties
//! come out non-negative and get their sign from the (negative) gain.

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::actuator::NUM_JOINTS;

pub const NUM_FEET: usize = 4;
pub const OBS_LEN: usize = 3 + 3 * NUM_JOINTS + 3;

/// Command or yaw rate magnitudes at or below this count as zero.
pub const ZERO_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("invalid robot state: {0}")]
    State(String),
    #[error("invalid reward gains: {0}")]
    Coeffs(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotState {
    /// Base linear velocity in the horizontal plane (m/s).
    pub v_xy: [f64; 2],
    pub v_z: f64,
    /// Base angular velocity (rad/s).
    pub omega: [f64; 3],
    pub h: f64,
    pub h0: f64,
    pub q: [f64; NUM_JOINTS],
    pub qd: [f64; NUM_JOINTS],
    pub qd_prev: [f64; NUM_JOINTS],
    pub q_nom: [f64; NUM_JOINTS],
    pub tau: [f64; NUM_JOINTS],
    /// Torque beyond the torque limits, per joint (N·m).
    pub tau_clip: [f64; NUM_JOINTS],
    /// Actions at t, t−1, t−2 (rad).
    pub q_des_hist: [[f64; NUM_JOINTS]; 3],
    /// Action beyond the action limits, per joint (rad).
    pub act_clip: [f64; NUM_JOINTS],
    /// Upper joint limits (rad).
    pub q_limit: [f64; NUM_JOINTS],
    pub contacts: [bool; NUM_FEET],
    pub foot_v: [[f64; 3]; NUM_FEET],
    pub foot_h: [f64; NUM_FEET],
    pub h_tar: f64,
    /// Ground reaction force magnitude at t, t−1, t−2, per foot (N).
    pub grf_hist: [[f64; 3]; NUM_FEET],
    #[serde(rename = "T_a")]
    pub t_air: [f64; NUM_FEET],
    #[serde(rename = "T_s")]
    pub t_stance: [f64; NUM_FEET],
    /// `(cmd_x, cmd_y, cmd_z)`, the last being a yaw rate.
    pub cmd: [f64; 3],
    /// Clearance-1 reward of the previous step, per foot.
    pub prev_c1: [f64; NUM_FEET],
}

impl Default for RobotState {
    fn default() -> Self {
        Self {
            v_xy: [0.0; 2],
            v_z: 0.0,
            omega: [0.0; 3],
            h: 0.0,
            h0: 0.0,
            q: [0.0; NUM_JOINTS],
            qd: [0.0; NUM_JOINTS],
            qd_prev: [0.0; NUM_JOINTS],
            q_nom: [0.0; NUM_JOINTS],
            tau: [0.0; NUM_JOINTS],
            tau_clip: [0.0; NUM_JOINTS],
            q_des_hist: [[0.0; NUM_JOINTS]; 3],
            act_clip: [0.0; NUM_JOINTS],
            q_limit: [std::f64::consts::PI; NUM_JOINTS],
            contacts: [false; NUM_FEET],
            foot_v: [[0.0; 3]; NUM_FEET],
            foot_h: [0.0; NUM_FEET],
            h_tar: 0.0,
            grf_hist: [[0.0; 3]; NUM_FEET],
            t_air: [0.0; NUM_FEET],
            t_stance: [0.0; NUM_FEET],
            cmd: [0.0; 3],
            prev_c1: [0.0; NUM_FEET],
        }
    }
}

impl RobotState {
    pub fn validate(&self) -> Result<(), RewardError> {
        let finite = |name: &str, v: &[f64]| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(RewardError::State(format!("{name} must be finite")))
            }
        };
        finite("v_xy", &self.v_xy)?;
        finite("v_z/h/h0/h_tar", &[self.v_z, self.h, self.h0, self.h_tar])?;
        finite("omega", &self.omega)?;
        for (name, v) in [
            ("q", &self.q),
            ("qd", &self.qd),
            ("qd_prev", &self.qd_prev),
            ("q_nom", &self.q_nom),
            ("tau", &self.tau),
            ("tau_clip", &self.tau_clip),
            ("act_clip", &self.act_clip),
            ("q_limit", &self.q_limit),
        ] {
            finite(name, v)?;
        }
        finite("q_des_hist", self.q_des_hist.as_flattened())?;
        finite("foot_v", self.foot_v.as_flattened())?;
        finite("foot_h", &self.foot_h)?;
        finite("grf_hist", self.grf_hist.as_flattened())?;
        finite("cmd", &self.cmd)?;
        finite("prev_c1", &self.prev_c1)?;
        if self.t_air.iter().chain(&self.t_stance).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(RewardError::State("T_a and T_s must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn cmd_norm(&self) -> f64 {
        norm(&self.cmd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardCoeffs {
    pub k_cmd: f64,
    pub k_yaw: f64,
    pub k_h: f64,
    pub k_m: f64,
    pub k_tau: f64,
    pub k_tauclip: f64,
    pub k_q: f64,
    pub k_qd: f64,
    pub k_qdd: f64,
    pub k_s: f64,
    pub k_fl: f64,
    pub k_a: f64,
    pub k_slip: f64,
    pub k_c1: f64,
    pub k_c2: f64,
    pub k_grf: f64,
    pub k_act: f64,
    pub k_l: f64,
    /// Curriculum factor in `[0, 1]`.
    pub c_f: f64,
    /// Take the ×10 yaw branch on a zero yaw command instead of a zero yaw rate.
    #[serde(default)]
    pub yaw_branch_on_command: bool,
}

impl Default for RewardCoeffs {
    /// Placeholder gains; penalties are negative.
    fn default() -> Self {
        Self {
            k_cmd: 1.0,
            k_yaw: -0.5,
            k_h: 0.5,
            k_m: -1.0,
            k_tau: -1e-5,
            k_tauclip: -1e-3,
            k_q: -0.2,
            k_qd: -1e-3,
            k_qdd: -1e-4,
            k_s: -0.05,
            k_fl: -1.0,
            k_a: 1.0,
            k_slip: -0.1,
            k_c1: -5.0,
            k_c2: -1.0,
            k_grf: -1e-6,
            k_act: -0.1,
            k_l: -1.0,
            c_f: 1.0,
            yaw_branch_on_command: false,
        }
    }
}

impl RewardCoeffs {
    pub fn validate(&self) -> Result<(), RewardError> {
        let gains = [
            self.k_cmd,
            self.k_yaw,
            self.k_h,
            self.k_m,
            self.k_tau,
            self.k_tauclip,
            self.k_q,
            self.k_qd,
            self.k_qdd,
            self.k_s,
            self.k_fl,
            self.k_a,
            self.k_slip,
            self.k_c1,
            self.k_c2,
            self.k_grf,
            self.k_act,
            self.k_l,
        ];
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(RewardError::Coeffs("gains must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.c_f) {
            return Err(RewardError::Coeffs(format!("c_f must be in [0, 1], got {}", self.c_f)));
        }
        Ok(())
    }

    pub fn zeros() -> Self {
        Self {
            k_cmd: 0.0,
            k_yaw: 0.0,
            k_h: 0.0,
            k_m: 0.0,
            k_tau: 0.0,
            k_tauclip: 0.0,
            k_q: 0.0,
            k_qd: 0.0,
            k_qdd: 0.0,
            k_s: 0.0,
            k_fl: 0.0,
            k_a: 0.0,
            k_slip: 0.0,
            k_c1: 0.0,
            k_c2: 0.0,
            k_grf: 0.0,
            k_act: 0.0,
            k_l: 0.0,
            c_f: 0.0,
            yaw_branch_on_command: false,
        }
    }
}

/// Ordered `label → value` list; serializes as a JSON object in this order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardTerms(pub Vec<(String, f64)>);

impl RewardTerms {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.0.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().map(|(_, v)| v).sum()
    }

    fn push(&mut self, label: impl Into<String>, v: f64) {
        self.0.push((label.into(), v));
    }
}

impl Serialize for RewardTerms {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn norm(v: &[f64]) -> f64 {
    sq_norm(v).sqrt()
}

fn diff<const N: usize>(a: &[f64; N], b: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| a[i] - b[i])
}

/// `[ω(3), q(12), q̇(12), q_des_prev(12), cmd(3)]`.
pub fn assemble_observation(state: &RobotState, q_des_prev: &[f64; NUM_JOINTS], cmd: &[f64; 3]) -> [f64; OBS_LEN] {
    let mut o = [0.0; OBS_LEN];
    o[..3].copy_from_slice(&state.omega);
    o[3..15].copy_from_slice(&state.q);
    o[15..27].copy_from_slice(&state.qd);
    o[27..39].copy_from_slice(q_des_prev);
    o[39..].copy_from_slice(cmd);
    o
}

/// The ten whole-robot terms.
pub fn global_rewards(s: &RobotState, k: &RewardCoeffs) -> RewardTerms {
    let mut t = RewardTerms::default();
    let cf = k.c_f;
    let e_xy = norm(&[s.cmd[0] - s.v_xy[0], s.cmd[1] - s.v_xy[1]]);
    let e_yaw = s.cmd[2] - s.omega[2];
    t.push(
        "r_v",
        k.k_cmd * ((-e_xy * e_xy).exp() * (1.0 + (-0.5 * e_xy).exp()) + (-1.5 * e_yaw * e_yaw).exp()),
    );
    let yaw_probe = if k.yaw_branch_on_command { s.cmd[2] } else { s.omega[2] };
    let yaw_mult = if yaw_probe.abs() <= ZERO_TOL { 10.0 } else { 1.0 };
    t.push("r_yaw", yaw_mult * cf * k.k_yaw * e_yaw * e_yaw);
    t.push("r_h", k.k_h * (-40.0 * (s.h0 - s.h).abs()).exp());
    t.push("r_m", k.k_m * (s.v_z * s.v_z + 0.02 * (s.omega[0].abs() + s.omega[1].abs())));
    t.push("r_tau", cf * k.k_tau * sq_norm(&s.tau));
    t.push("r_tauclip", cf * k.k_tauclip * sq_norm(&s.tau_clip));
    let q_mult = if s.cmd_norm() <= ZERO_TOL { 10.0 } else { 1.0 };
    t.push("r_q", q_mult * cf * k.k_q * norm(&diff(&s.q, &s.q_nom)));
    t.push("r_qd", cf * k.k_qd * sq_norm(&s.qd));
    t.push("r_qdd", cf * k.k_qdd * sq_norm(&diff(&s.qd, &s.qd_prev)));
    let [a0, a1, a2] = &s.q_des_hist;
    let second: [f64; NUM_JOINTS] = std::array::from_fn(|j| a0[j] - 2.0 * a1[j] + a2[j]);
    t.push("r_s", cf * k.k_s * (0.5 * sq_norm(&second) + sq_norm(&diff(a0, a1))));
    t
}

/// Airtime reward for one foot; branches are tried in order and the first match wins.
pub fn airtime(k_a: f64, cmd_norm: f64, t_air: f64, t_stance: f64) -> f64 {
    if cmd_norm <= ZERO_TOL {
        k_a * (t_stance - t_air).clamp(-0.25, 0.25)
    } else if t_air < 0.25 {
        k_a * t_air.min(0.2)
    } else if t_stance < 0.25 {
        k_a * t_stance.min(0.2)
    } else {
        0.0
    }
}

/// Flight phase plus the per-foot and per-joint terms, labelled `name[i]`.
pub fn local_rewards(s: &RobotState, k: &RewardCoeffs) -> RewardTerms {
    let mut t = RewardTerms::default();
    let cf = k.c_f;
    let cmd_norm = s.cmd_norm();
    let airborne = s.contacts.iter().all(|c| !c);
    t.push("r_fl", if airborne { cf * k.k_fl } else { 0.0 });
    for i in 0..NUM_FEET {
        t.push(format!("r_air[{i}]"), airtime(k.k_a, cmd_norm, s.t_air[i], s.t_stance[i]));
    }
    for i in 0..NUM_FEET {
        let v = if s.contacts[i] { cf * k.k_slip * sq_norm(&s.foot_v[i][..2]) } else { 0.0 };
        t.push(format!("r_slip[{i}]"), v);
    }
    for i in 0..NUM_FEET {
        let dh = s.foot_h[i] - s.h_tar;
        let v = if !s.contacts[i] && cmd_norm > ZERO_TOL { k.k_c1 * norm(&s.foot_v[i]) * dh * dh } else { 0.0 };
        t.push(format!("r_c1[{i}]"), v);
    }
    for i in 0..NUM_FEET {
        t.push(format!("r_c2[{i}]"), if s.contacts[i] { k.k_c2 * s.prev_c1[i] } else { 0.0 });
    }
    for i in 0..NUM_FEET {
        let [f0, f1, f2] = s.grf_hist[i];
        let second = f0 - 2.0 * f1 + f2;
        let first = f0 - f1;
        t.push(format!("r_grf[{i}]"), cf * k.k_grf * (0.5 * second * second + first * first));
    }
    for j in 0..NUM_JOINTS {
        t.push(format!("r_act[{j}]"), cf * k.k_act * s.act_clip[j].abs());
    }
    for j in 0..NUM_JOINTS {
        t.push(format!("r_l[{j}]"), if s.q[j] > s.q_limit[j] { cf * k.k_l } else { 0.0 });
    }
    t
}

pub fn total_reward(s: &RobotState, k: &RewardCoeffs) -> f64 {
    global_rewards(s, k).sum() + local_rewards(s, k).sum()
}

/// Validated global and local term maps plus their total, for the `rewards-check` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub global: RewardTerms,
    pub local: RewardTerms,
    pub total: f64,
}

pub fn reward_breakdown(s: &RobotState, k: &RewardCoeffs) -> Result<RewardBreakdown, RewardError> {
    s.validate()?;
    k.validate()?;
    let global = global_rewards(s, k);
    let local = local_rewards(s, k);
    let total = global.sum() + local.sum();
    Ok(RewardBreakdown { global, local, total })
}
