use super::closed_loop::{run_closed_loop, LoopConfig, LoopMode, LoopRun, RigSim};
use super::ControlError;
use crate::oracle::RigState;

/// First time after which `|q − target|` stays within `tol·|step|` for the rest of the run.
/// `None` if the response never settles or the run diverged.
pub fn settling_time(run: &LoopRun, start: f64, target: f64, tol: f64) -> Option<f64> {
    if run.diverged() {
        return None;
    }
    let band = tol * (target - start).abs();
    let last_out = run.records.iter().rposition(|r| (r.q - target).abs() >= band);
    match last_out {
        None => Some(0.0),
        Some(i) if i + 1 < run.records.len() => Some(run.records[i + 1].t),
        Some(_) => None,
    }
}

/// Step response of a position loop from rest at `start` to `target`.
pub fn position_step(
    cfg: &LoopConfig,
    sim: &RigSim,
    start: f64,
    target: f64,
    duration: f64,
) -> Result<LoopRun, ControlError> {
    if cfg.mode != LoopMode::Position {
        return Err(ControlError::Config("position_step needs a position loop".into()));
    }
    run_closed_loop(cfg, sim, RigState::at_rest(&sim.rig, start), |t| if t > 0.0 { target } else { start }, duration)
}

/// Bisects the proportional gain for the smallest `kp` in `[lo, hi]` whose step
/// response settles to 2% within `settle_time`.
pub fn tune_position_kp(
    base: &LoopConfig,
    sim: &RigSim,
    step: f64,
    settle_time: f64,
    (mut lo, mut hi): (f64, f64),
    iterations: usize,
) -> Result<f64, ControlError> {
    let settles = |kp: f64| -> Result<bool, ControlError> {
        let mut cfg = *base;
        cfg.gains.kp = kp;
        let run = position_step(&cfg, sim, 0.0, step, 2.0 * settle_time)?;
        Ok(settling_time(&run, 0.0, step, 0.02).is_some_and(|t| t <= settle_time))
    };
    if !settles(hi)? {
        return Err(ControlError::Config(format!("upper kp bound {hi} does not settle within {settle_time} s")));
    }
    if settles(lo)? {
        return Ok(lo);
    }
    for _ in 0..iterations {
        let mid = (lo * hi).sqrt();
        if settles(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
