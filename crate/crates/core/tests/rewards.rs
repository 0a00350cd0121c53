mod common;

use hydrodyn::reward::{
    assemble_observation, global_rewards, local_rewards, reward_breakdown, total_reward, RewardCoeffs, RobotState, OBS_LEN,
};
use proptest::prelude::*;

#[test]
fn hand_computed_fixture_total() {
    let total = total_reward(&common::fixture_state(), &common::fixture_gains());
    let expected = common::fixture_total();
    assert!((total - expected).abs() <= 1e-12, "{total} vs {expected}");
}

#[test]
fn perfect_tracking_and_nominal_height_are_exact() {
    let k = RewardCoeffs { k_cmd: 1.7, k_h: 0.6, ..RewardCoeffs::zeros() };
    let s = RobotState { v_xy: [0.4, 0.0], cmd: [0.4, 0.0, -0.2], omega: [0.0, 0.0, -0.2], h: 0.55, h0: 0.55, ..Default::default() };
    let g = global_rewards(&s, &k);
    assert!((g.get("r_v").unwrap() - 3.0 * 1.7).abs() <= 1e-12);
    assert!((g.get("r_h").unwrap() - 0.6).abs() <= 1e-12);
}

#[test]
fn breakdown_json_round_trip() {
    let b = reward_breakdown(&common::fixture_state(), &common::fixture_gains()).unwrap();
    let v: serde_json::Value = serde_json::to_value(&b).unwrap();
    assert_eq!(v["global"].as_object().unwrap().len(), 10);
    assert_eq!(v["local"].as_object().unwrap().len(), 1 + 5 * 4 + 2 * 12);
    let text = serde_json::to_string(&common::fixture_state()).unwrap();
    assert_eq!(serde_json::from_str::<RobotState>(&text).unwrap(), common::fixture_state());
}

#[test]
fn invalid_inputs_rejected() {
    let s = RobotState { h: f64::NAN, ..Default::default() };
    assert!(reward_breakdown(&s, &RewardCoeffs::default()).is_err());
    let k = RewardCoeffs { c_f: -0.1, ..RewardCoeffs::default() };
    assert!(reward_breakdown(&RobotState::default(), &k).is_err());
}

const GATED: [&str; 12] =
    ["r_yaw", "r_tau", "r_tauclip", "r_q", "r_qd", "r_qdd", "r_s", "r_fl", "r_slip", "r_grf", "r_act", "r_l"];

fn base(label: &str) -> &str {
    label.split('[').next().unwrap()
}

fn arb_state() -> impl Strategy<Value = RobotState> {
    let v = |n: usize, r: f64| prop::collection::vec(-r..r, n);
    (
        (v(2, 2.0), v(3, 2.0), v(3, 2.0), -0.5..0.5f64, 0.0..1.0f64),
        (v(12, 1.5), v(12, 5.0), v(12, 5.0), v(12, 300.0), v(12, 1.0)),
        (prop::array::uniform4(any::<bool>()), v(12, 0.5), v(4, 0.3), v(4, 1.0), v(12, 0.5)),
        (v(4, 0.2), v(12, 20.0)),
    )
        .prop_map(|((vxy, omega, cmd, vz, h), (q, qd, qd_prev, tau, qdes), (contacts, act, foot_h, t, qlim), (c1, clip))| {
            let arr12 = |v: &Vec<f64>| -> [f64; 12] { v.as_slice().try_into().unwrap() };
            let arr4 = |v: &Vec<f64>| -> [f64; 4] { v.as_slice().try_into().unwrap() };
            RobotState {
                v_xy: [vxy[0], vxy[1]],
                v_z: vz,
                omega: [omega[0], omega[1], omega[2]],
                h,
                h0: 0.5,
                q: arr12(&q),
                qd: arr12(&qd),
                qd_prev: arr12(&qd_prev),
                q_nom: [0.0; 12],
                tau: arr12(&tau),
                tau_clip: arr12(&clip),
                q_des_hist: [arr12(&qdes), arr12(&q), [0.0; 12]],
                act_clip: arr12(&act),
                q_limit: arr12(&qlim).map(|x| x.abs() + 0.5),
                contacts,
                foot_v: [[vxy[0], omega[0], vz]; 4],
                foot_h: arr4(&foot_h).map(f64::abs),
                h_tar: 0.1,
                grf_hist: [[tau[0].abs(), tau[1].abs(), tau[2].abs()]; 4],
                t_air: arr4(&t).map(f64::abs),
                t_stance: arr4(&t).map(|x| 1.0 - x.abs()),
                cmd: [cmd[0], cmd[1], cmd[2]],
                prev_c1: arr4(&c1).map(|x| -x.abs()),
            }
        })
}

proptest! {
    #[test]
    fn total_is_sum_of_terms(s in arb_state()) {
        let k = RewardCoeffs::default();
        let sum = global_rewards(&s, &k).sum() + local_rewards(&s, &k).sum();
        prop_assert_eq!(total_reward(&s, &k), sum);
    }

    #[test]
    fn negative_gains_give_nonpositive_penalties(s in arb_state()) {
        let k = RewardCoeffs::default();
        for (label, v) in global_rewards(&s, &k).0.iter().chain(&local_rewards(&s, &k).0) {
            let b = base(label);
            if !["r_v", "r_h", "r_air", "r_c2"].contains(&b) {
                prop_assert!(*v <= 0.0, "{} = {}", label, v);
            }
        }
    }

    #[test]
    fn gated_terms_scale_with_curriculum(s in arb_state(), c in 0.0..1.0f64) {
        let one = RewardCoeffs { c_f: 1.0, ..RewardCoeffs::default() };
        let part = RewardCoeffs { c_f: c, ..one };
        let (g1, l1) = (global_rewards(&s, &one), local_rewards(&s, &one));
        let (gc, lc) = (global_rewards(&s, &part), local_rewards(&s, &part));
        for ((label, v1), (_, vc)) in g1.0.iter().chain(&l1.0).zip(gc.0.iter().chain(&lc.0)) {
            let expect = if GATED.contains(&base(label)) { c * v1 } else { *v1 };
            prop_assert!((vc - expect).abs() <= 1e-12 * v1.abs().max(1.0), "{}: {} vs {}", label, vc, expect);
        }
    }

    #[test]
    fn bounded_positive_terms(s in arb_state()) {
        let k = RewardCoeffs::default();
        let g = global_rewards(&s, &k);
        let r_v = g.get("r_v").unwrap();
        prop_assert!(r_v > 0.0 && r_v <= 3.0 * k.k_cmd + 1e-12);
        let r_h = g.get("r_h").unwrap();
        prop_assert!(r_h > 0.0 && r_h <= k.k_h);
        for (label, v) in &local_rewards(&s, &k).0 {
            if base(label) == "r_air" {
                prop_assert!(v.abs() <= 0.25 * k.k_a + 1e-12);
            }
        }
    }

    #[test]
    fn observation_is_a_plain_concatenation(s in arb_state(), prev in prop::array::uniform12(-1.0..1.0f64)) {
        let o = assemble_observation(&s, &prev, &s.cmd);
        prop_assert_eq!(o.len(), OBS_LEN);
        let expect: Vec<f64> = s.omega.iter().chain(&s.q).chain(&s.qd).chain(&prev).chain(&s.cmd).copied().collect();
        prop_assert_eq!(o.to_vec(), expect);
    }
}
