//! Headline acceptance criteria, run one after another so the timed ones do
//! not compete for cores. Prints one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::{model_problem, TRUE};
use hydrodyn::actuator::{predict_force_delta, predict_torque_next, ActuatorCoeffs, JointSnapshot};
use hydrodyn::cli::run_pipeline;
use hydrodyn::config::RunConfig;
use hydrodyn::control::{mode_contrast, run_closed_loop, LoopConfig, RigSim};
use hydrodyn::metrics::{bench_latency, thresholded_metrics};
use hydrodyn::nn::{gradient_check, Arch, NetParams, SeqBatch, BASELINE_DIMS};
use hydrodyn::oracle::{step_cylinder, step_rig, CylinderParams, CylinderState, RigParams, RigState};
use hydrodyn::reward::{global_rewards, total_reward, RewardCoeffs, RobotState};
use hydrodyn::sysid::{fit_coefficients, FitOptions};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn pipeline() -> Vec<Outcome> {
    let cfg = RunConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let s = run_pipeline(&cfg, dir.path()).expect("pipeline runs");
    let wall = start.elapsed().as_secs_f64();
    let mlp = s.training.iter().find(|t| t.arch == Arch::Mlp).expect("mlp trained");
    let shaped = s.table.models.len() == 4 && s.table.datasets.len() == cfg.eval.len();
    let ratio = s.heldout.rmse / s.heldout.torque_rms;
    let pipeline = Outcome {
        name: "end-to-end pipeline",
        pass: ratio <= 0.2 && wall < 300.0 && mlp.iterations == 1000 && shaped,
        detail: format!(
            "held-out rmse {:.2} N·m = {:.3} of torque rms {:.1}; mlp {} iterations; {}×{} table; {wall:.0} s",
            s.heldout.rmse,
            ratio,
            s.heldout.torque_rms,
            mlp.iterations,
            s.table.models.len(),
            s.table.datasets.len()
        ),
    };

    let analytic = s.ood.row("Actuator model").expect("analytic row");
    let mlp_row = s.ood.row("MLP").expect("mlp row");
    let ood = Outcome {
        name: "out-of-distribution robustness",
        pass: s.ood.ood_opposite_fraction >= 0.2 && analytic.ratio < mlp_row.ratio,
        detail: format!(
            "opposite fraction {:.3}; ood/id rmse ratio analytic {:.3} vs mlp {:.3}",
            s.ood.ood_opposite_fraction, analytic.ratio, mlp_row.ratio
        ),
    };
    vec![pipeline, ood]
}

fn coefficient_recovery() -> Outcome {
    let rel = |c: &ActuatorCoeffs| -> Vec<f64> {
        [c.k1, c.k2, c.k3, c.k4].iter().zip(TRUE).map(|(e, t)| (e - t).abs() / t).collect()
    };
    let (clean, _) = fit_coefficients(&model_problem(20_000, 0.0, 1), &FitOptions::default()).unwrap();
    let noisy_prob = model_problem(20_000, 0.01, 2);
    let start = Instant::now();
    let (noisy, _) = fit_coefficients(&noisy_prob, &FitOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let clean_worst = rel(&clean).into_iter().fold(0.0, f64::max);
    let noisy_worst = rel(&noisy)[..3].iter().copied().fold(0.0, f64::max);
    Outcome {
        name: "coefficient recovery",
        pass: clean_worst < 1e-6 && noisy_worst < 0.02 && secs < 1.0,
        detail: format!("noiseless worst {clean_worst:.1e}; 1% noise k1..k3 worst {noisy_worst:.4}; fit {secs:.3} s"),
    }
}

fn model_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let c = ActuatorCoeffs::new(
            rng.random_range(1e3..1e5),
            rng.random_range(0.0..0.5),
            rng.random_range(0.0..5e3),
            rng.random_range(0.0..10.0),
            rng.random_range(0.02..0.1),
        )
        .unwrap();
        let q = rng.random_range(-1.5..1.5);
        let s = JointSnapshot::new(q, q + rng.random_range(-0.1..0.1), rng.random_range(-5.0..5.0), rng.random_range(-800.0..800.0));
        let a = predict_torque_next(&c, &s).unwrap();
        let b = s.tau + c.r * predict_force_delta(&c, s.tau / c.r, c.r * s.q, c.r * s.q_des, c.r * s.qd).unwrap();
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-12));
    }
    Outcome { name: "force/torque form consistency", pass: worst < 1e-9, detail: format!("worst relative gap {worst:.1e}") }
}

fn latency() -> Outcome {
    let coeffs = vec![ActuatorCoeffs::new(TRUE[0], TRUE[1], TRUE[2], TRUE[3], common::R).unwrap(); 12];
    let stats = bench_latency(&coeffs, 1_000_000, 7).unwrap();
    Outcome {
        name: "twelve-joint latency",
        pass: stats.median_ns < 1000.0 && stats.iterations >= 1_000_000,
        detail: format!("median {:.1} ns, p99 {:.1} ns over {} calls", stats.median_ns, stats.p99_ns, stats.iterations),
    }
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut draw = |r, c| Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0));
    let xs: Vec<_> = (0..5).map(|_| draw(2, BASELINE_DIMS.input)).collect();
    let ts: Vec<_> = (0..5).map(|_| draw(2, BASELINE_DIMS.output)).collect();
    let seq = SeqBatch { xs, ts };
    let single = SeqBatch { xs: seq.xs[..1].to_vec(), ts: seq.ts[..1].to_vec() };
    let errs: Vec<(Arch, f64)> = Arch::ALL
        .iter()
        .map(|&arch| {
            let batch = if arch.is_recurrent() { &seq } else { &single };
            (arch, gradient_check(&NetParams::init(arch, BASELINE_DIMS, 21), batch, 1e-5).unwrap())
        })
        .collect();
    Outcome {
        name: "backprop gradient checks",
        pass: errs.iter().all(|(_, e)| *e < 1e-4),
        detail: errs.iter().map(|(a, e)| format!("{a} {e:.1e}")).collect::<Vec<_>>().join(", "),
    }
}

fn reward_exactness() -> Outcome {
    let k = RewardCoeffs { k_cmd: 1.7, k_h: 0.6, ..RewardCoeffs::zeros() };
    let s = RobotState { v_xy: [0.4, 0.0], cmd: [0.4, 0.0, -0.2], omega: [0.0, 0.0, -0.2], h: 0.55, h0: 0.55, ..Default::default() };
    let g = global_rewards(&s, &k);
    let dv = (g.get("r_v").unwrap() - 3.0 * k.k_cmd).abs();
    let dh = (g.get("r_h").unwrap() - k.k_h).abs();
    let dt = (total_reward(&common::fixture_state(), &common::fixture_gains()) - common::fixture_total()).abs();
    Outcome {
        name: "reward exactness",
        pass: dv <= 1e-12 && dh <= 1e-12 && dt <= 1e-12,
        detail: format!("r_v gap {dv:.1e}, r_h gap {dh:.1e}, fixture total gap {dt:.1e}"),
    }
}

fn control_modes() -> Outcome {
    let c = mode_contrast(&LoopConfig::default_torque(), &LoopConfig::default_position(), &RigSim::default()).unwrap();
    let lag = |f: f64| c.torque_lag_deg.iter().find(|(hz, _)| *hz == f).map(|(_, l)| *l).unwrap();
    let (slow, fast) = (lag(0.5), lag(5.0));
    Outcome {
        name: "control-mode contrast",
        pass: fast > slow && !c.position_diverged && c.position_settling_s.is_some(),
        detail: format!("torque lag {slow:.1}° at 0.5 Hz, {fast:.1}° at 5 Hz; position settles in {:?} s", c.position_settling_s),
    }
}

fn oracle_integrity() -> Outcome {
    let p = CylinderParams::default();
    let (u, dt) = (3e-4, 1e-4);
    let mut s = CylinderState { x: 0.1, x_dot: 0.0, f: 0.0, x_s: 0.0 };
    let mut valve: f64 = 0.0;
    for k in 1..=500 {
        s = step_cylinder(&p, &s, u, 0.0, dt).unwrap();
        let exact = u * (1.0 - (-(k as f64) * dt / p.tau_v).exp());
        valve = valve.max((s.x_s - exact).abs() / exact);
    }

    let end_force = |substeps| {
        let sim = RigSim { substeps, ..RigSim::default() };
        let run =
            run_closed_loop(&LoopConfig::default_position(), &sim, RigState::default(), |t| 0.3 * (2.0 * PI * 1.5 * t).sin(), 1.0)
                .unwrap();
        run.records.last().unwrap().tau / sim.rig.radius
    };
    let (coarse, fine) = (end_force(10), end_force(20));
    let halving = (coarse - fine).abs() / fine.abs();

    let rig = RigParams { damping: 0.0, ..RigParams::default() };
    let s0 = RigState { qd: 1.0, ..RigState::at_rest(&rig, 0.3) };
    let e0 = common::closed_valve_energy(&rig, &p, &s0, &s0);
    let scale = 0.5 * rig.inertia * s0.qd * s0.qd;
    let mut r = s0;
    let mut drift: f64 = 0.0;
    for _ in 0..1000 {
        r = step_rig(&rig, &p, &r, 0.0, 0.0, 1e-3, 10).unwrap();
        drift = drift.max((common::closed_valve_energy(&rig, &p, &s0, &r) - e0).abs() / scale);
    }
    Outcome {
        name: "oracle integrity",
        pass: valve < 1e-6 && halving < 1e-3 && drift < 5e-3,
        detail: format!("valve lag error {valve:.1e}; step-halving force change {halving:.1e}; energy drift {drift:.1e}"),
    }
}

fn metric_oracle() -> Outcome {
    let hand = thresholded_metrics(&[110.0, 40.0, -66.0], &[100.0, 40.0, -60.0], 50.0).unwrap();
    let hand_ok = hand.rmse_thresh == Some(68.0f64.sqrt()) && hand.mape_thresh == Some(10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let actual: Vec<f64> = (0..1000).map(|_| rng.random_range(-300.0..300.0)).collect();
    let pred: Vec<f64> = actual.iter().map(|a| a + rng.random_range(-30.0..30.0)).collect();
    let r = thresholded_metrics(&pred, &actual, 50.0).unwrap();
    let (all, th, mape) = common::brute_metrics(&pred, &actual, 50.0);
    let gap = [(r.rmse_all, all), (r.rmse_thresh.unwrap(), th.unwrap()), (r.mape_thresh.unwrap(), mape.unwrap())]
        .iter()
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max);
    Outcome {
        name: "metric oracle",
        pass: hand_ok && gap <= 1e-12,
        detail: format!(
            "hand example rmse_thresh {:?}, mape {:?}; brute-force gap {gap:.1e}",
            hand.rmse_thresh, hand.mape_thresh
        ),
    }
}

#[test]
fn primary_criteria() {
    let mut outcomes = vec![
        coefficient_recovery(),
        model_consistency(),
        gradients(),
        reward_exactness(),
        control_modes(),
        oracle_integrity(),
        metric_oracle(),
    ];
    outcomes.extend(pipeline());
    outcomes.push(latency());
    for o in &outcomes {
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
