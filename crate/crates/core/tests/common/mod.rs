//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use hydrodyn::actuator::{predict_torque_next, ActuatorCoeffs, JointSnapshot};
use hydrodyn::oracle::{CylinderParams, RigParams, RigState};
use hydrodyn::reward::{RewardCoeffs, RobotState};
use hydrodyn::sysid::{regression_row, RegressionProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Amplitude and phase (rad) of the `freq` component of `x`, by a plain DFT sum.
pub fn dft_bin(x: &[f64], freq: f64, dt: f64) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let w = 2.0 * PI * freq * i as f64 * dt;
        re += v * w.cos();
        im -= v * w.sin();
    }
    let n = x.len() as f64;
    (2.0 * (re * re + im * im).sqrt() / n, im.atan2(re))
}

/// Lag (deg, wrapped to [0, 360)) of `measured` behind `reference` over the
/// last whole number of periods after `skip` samples.
pub fn dft_lag_deg(reference: &[f64], measured: &[f64], dt: f64, freq: f64, skip: usize) -> f64 {
    let period = 1.0 / (freq * dt);
    let periods = ((reference.len() - skip) as f64 / period).floor();
    let n = (periods * period).round() as usize;
    let start = reference.len() - n;
    let (_, pr) = dft_bin(&reference[start..], freq, dt);
    let (_, pm) = dft_bin(&measured[start..], freq, dt);
    (pr - pm).to_degrees().rem_euclid(360.0)
}

/// Naive RMSE over all pairs, and RMSE / MAPE (%) over pairs with |actual| > thresh.
pub fn brute_metrics(pred: &[f64], actual: &[f64], thresh: f64) -> (f64, Option<f64>, Option<f64>) {
    let mut sq = 0.0;
    for i in 0..pred.len() {
        sq += (pred[i] - actual[i]) * (pred[i] - actual[i]);
    }
    let all = (sq / pred.len() as f64).sqrt();
    let mut sq_t = 0.0;
    let mut pct = 0.0;
    let mut n = 0usize;
    for i in 0..pred.len() {
        if actual[i].abs() > thresh {
            sq_t += (pred[i] - actual[i]) * (pred[i] - actual[i]);
            pct += ((pred[i] - actual[i]) / actual[i]).abs();
            n += 1;
        }
    }
    if n == 0 {
        (all, None, None)
    } else {
        (all, Some((sq_t / n as f64).sqrt()), Some(100.0 * pct / n as f64))
    }
}

/// Mechanical plus hydraulic energy of a rig with a closed valve, relative to
/// the reference state `s0` (whose force fixes the chamber pressures).
pub fn closed_valve_energy(rig: &RigParams, cyl: &CylinderParams, s0: &RigState, s: &RigState) -> f64 {
    let x0 = rig.piston_position(cyl, s0.q);
    let x = rig.piston_position(cyl, s.q);
    let va0 = cyl.v0a + cyl.area * x0;
    let vb0 = cyl.v0b + cyl.area * (cyl.stroke - x0);
    let va = cyl.v0a + cyl.area * x;
    let vb = cyl.v0b + cyl.area * (cyl.stroke - x);
    // f(x) = f0 − βA·ln(Va/Va0) + βA·ln(Vb/Vb0), U = −∫f dx
    let chamber = |v: f64, v0: f64| cyl.beta * (v * (v / v0).ln() - v + v0);
    let hydraulic = -s0.f * (x - x0) + chamber(va, va0) + chamber(vb, vb0);
    let kinetic = 0.5 * rig.inertia * s.qd * s.qd;
    let gravity = rig.gravity_torque_amp * (1.0 - s.q.cos());
    kinetic + gravity + hydraulic
}

pub const TRUE: [f64; 4] = [4.0e4, 0.05, 2.0e3, 3.0];
pub const R: f64 = 0.05;

/// Snapshots drawn independently, with next-step torque from the model itself
/// plus Gaussian noise of `noise` times the snapshot torque scale.
pub fn model_problem(n: usize, noise: f64, seed: u64) -> RegressionProblem {
    let c = ActuatorCoeffs::new(TRUE[0], TRUE[1], TRUE[2], TRUE[3], R).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let q = rng.random_range(-1.0..1.0);
        let s = JointSnapshot::new(q, q + rng.random_range(-0.05..0.05), rng.random_range(-3.0..3.0), rng.random_range(-300.0..300.0));
        let sd = noise * s.tau.abs();
        let eps = if sd > 0.0 { Normal::new(0.0, sd).unwrap().sample(&mut rng) } else { 0.0 };
        let next = predict_torque_next(&c, &s).unwrap() + eps;
        features.push(regression_row(R, s.q, s.q_des, s.qd, s.tau));
        targets.push(next - s.tau);
    }
    RegressionProblem { features, targets, joint_id: 0, radius: R, skipped_gaps: 0 }
}

pub fn fixture_gains() -> RewardCoeffs {
    RewardCoeffs {
        k_cmd: 1.0,
        k_yaw: -0.5,
        k_h: 0.5,
        k_m: -1.0,
        k_tau: -1e-4,
        k_tauclip: -1e-2,
        k_q: -0.2,
        k_qd: -1e-2,
        k_qdd: -1e-3,
        k_s: -0.1,
        k_fl: -1.0,
        k_a: 2.0,
        k_slip: -0.3,
        k_c1: -4.0,
        k_c2: -0.5,
        k_grf: -1e-4,
        k_act: -0.2,
        k_l: -1.5,
        c_f: 0.5,
        yaw_branch_on_command: false,
    }
}

pub fn fixture_state() -> RobotState {
    let mut q = [0.0; 12];
    q[0] = 0.3;
    q[1] = 0.4;
    let mut tau_clip = [0.0; 12];
    tau_clip[5] = 10.0;
    let mut act_clip = [0.0; 12];
    act_clip[3] = 0.2;
    RobotState {
        v_xy: [0.8, 0.1],
        v_z: 0.1,
        omega: [0.2, -0.1, 0.3],
        h: 0.48,
        h0: 0.5,
        q,
        qd: [1.0; 12],
        qd_prev: [0.5; 12],
        q_nom: [0.0; 12],
        tau: [100.0; 12],
        tau_clip,
        q_des_hist: [[0.3; 12], [0.2; 12], [0.0; 12]],
        act_clip,
        q_limit: [0.25; 12],
        contacts: [true, false, true, false],
        foot_v: [[0.1, 0.2, 0.0], [0.3, 0.0, 0.4], [0.0, 0.1, 0.0], [0.0, 0.0, 0.0]],
        foot_h: [0.0, 0.05, 0.0, 0.2],
        h_tar: 0.1,
        grf_hist: [[100.0, 90.0, 70.0], [0.0; 3], [200.0; 3], [0.0; 3]],
        t_air: [0.1, 0.3, 0.5, 0.3],
        t_stance: [0.4, 0.1, 0.3, 0.3],
        cmd: [1.0, 0.0, 0.5],
        prev_c1: [-0.01, -0.02, -0.03, -0.04],
    }
}

/// Total reward of the fixture, worked out term by term.
pub fn fixture_total() -> f64 {
    // e_xy = (0.2, −0.1): |e|² = 0.05; yaw error 0.5 − 0.3 = 0.2
    let r_v = (-0.05f64).exp() * (1.0 + (-0.5 * 0.05f64.sqrt()).exp()) + (-1.5 * 0.04f64).exp();
    let r_yaw = 0.5 * -0.5 * 0.04;
    let r_h = 0.5 * (-40.0 * 0.02f64).exp();
    let r_m = -(0.01 + 0.02 * 0.3);
    let r_tau = 0.5 * -1e-4 * 12.0 * 100.0 * 100.0;
    let r_tauclip = 0.5 * -1e-2 * 100.0;
    let r_q = 0.5 * -0.2 * 0.5;
    let r_qd = 0.5 * -1e-2 * 12.0;
    let r_qdd = 0.5 * -1e-3 * 12.0 * 0.25;
    // second difference −0.1 and first difference 0.1 on every joint
    let r_s = 0.5 * -0.1 * (0.5 * 12.0 * 0.01 + 12.0 * 0.01);
    let global = r_v + r_yaw + r_h + r_m + r_tau + r_tauclip + r_q + r_qd + r_qdd + r_s;

    let r_fl = 0.0;
    // foot 0 still in its first 0.25 s of air time, foot 1 of stance
    let r_air = 2.0 * 0.1 + 2.0 * 0.1;
    let r_slip = 0.5 * -0.3 * 0.05 + 0.5 * -0.3 * 0.01;
    // foot 1 swinging at 0.5 m/s, 0.05 m below target; foot 3 at rest
    let r_c1 = -4.0 * 0.5 * 0.0025;
    let r_c2 = -0.5 * -0.01 + -0.5 * -0.03;
    // foot 0: second difference −10, first difference 10
    let r_grf = 0.5 * -1e-4 * (0.5 * 100.0 + 100.0);
    let r_act = 0.5 * -0.2 * 0.2;
    let r_l = 2.0 * 0.5 * -1.5;
    let local = r_fl + r_air + r_slip + r_c1 + r_c2 + r_grf + r_act + r_l;
    global + local
}
