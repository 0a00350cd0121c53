use serde::{Deserialize, Serialize};

use super::ControlError;

/// PID gains with integral and output clamps. The output is a valve command (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Clamp on the integral state.
    pub i_limit: f64,
    /// Clamp on the output.
    pub u_limit: f64,
}

impl PidGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        let all = [self.kp, self.ki, self.kd, self.i_limit, self.u_limit];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::Config("PID gains must be finite".into()));
        }
        if self.kp < 0.0 || self.ki < 0.0 || self.kd < 0.0 {
            return Err(ControlError::Config("PID gains must be >= 0".into()));
        }
        if self.i_limit <= 0.0 || self.u_limit <= 0.0 {
            return Err(ControlError::Config("PID limits must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_err: f64,
}

/// One controller update. The derivative acts on the error; the integral is
/// frozen on any step where the unclamped output would saturate.
pub fn pid_step(g: &PidGains, err: f64, state: PidState, dt: f64) -> (f64, PidState) {
    let (candidate, derivative) = if dt > 0.0 {
        ((state.integral + err * dt).clamp(-g.i_limit, g.i_limit), (err - state.prev_err) / dt)
    } else {
        (state.integral, 0.0)
    };
    let raw = g.kp * err + g.ki * candidate + g.kd * derivative;
    if raw.abs() > g.u_limit {
        let held = g.kp * err + g.ki * state.integral + g.kd * derivative;
        (held.clamp(-g.u_limit, g.u_limit), PidState { integral: state.integral, prev_err: err })
    } else {
        (raw, PidState { integral: candidate, prev_err: err })
    }
}
