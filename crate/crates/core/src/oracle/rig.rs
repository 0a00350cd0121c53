//! One-joint test rig: a cylinder driving a pendulum-like load through a sprocket.
//!
//! The piston sits at mid-stroke when the joint is at zero, `x = L/2 + R·q`, so
//! the joint can swing both ways. Load dynamics:
//! `I·q̈ = R·f − c·q̇ − G·sin(q) + τ_ext`.

use serde::{Deserialize, Serialize};

use super::cylinder::{force_rate, valve_rate, CylinderParams};
use super::OracleError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigParams {
    /// Joint inertia (kg·m²).
    pub inertia: f64,
    /// Viscous joint damping (N·m·s/rad).
    pub damping: f64,
    /// Gravity torque amplitude `m·g·l` (N·m).
    pub gravity_torque_amp: f64,
    /// Sprocket radius (m).
    #[serde(rename = "R")]
    pub radius: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl Default for RigParams {
    fn default() -> Self {
        Self { inertia: 0.05, damping: 0.5, gravity_torque_amp: 200.0, radius: 0.05, q_min: -1.5, q_max: 1.5 }
    }
}

impl RigParams {
    pub fn validate(&self, cyl: &CylinderParams) -> Result<(), OracleError> {
        let finite = [self.inertia, self.damping, self.gravity_torque_amp, self.radius, self.q_min, self.q_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(OracleError::Config("rig parameters must be finite".into()));
        }
        if self.inertia <= 0.0 || self.radius <= 0.0 {
            return Err(OracleError::Config("rig inertia and R must be > 0".into()));
        }
        if self.damping < 0.0 || self.gravity_torque_amp < 0.0 {
            return Err(OracleError::Config("rig damping and gravity torque must be >= 0".into()));
        }
        if self.q_min >= self.q_max {
            return Err(OracleError::Config("rig q_min must be < q_max".into()));
        }
        let half = 0.5 * cyl.stroke / self.radius;
        if self.q_min < -half || self.q_max > half {
            return Err(OracleError::Config(format!(
                "joint limits [{}, {}] exceed the cylinder stroke (±{half:.3} rad)",
                self.q_min, self.q_max
            )));
        }
        Ok(())
    }

    pub fn piston_position(&self, cyl: &CylinderParams, q: f64) -> f64 {
        0.5 * cyl.stroke + self.radius * q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigState {
    /// Joint angle (rad).
    pub q: f64,
    /// Joint velocity (rad/s).
    pub qd: f64,
    /// Cylinder force (N).
    pub f: f64,
    /// Valve opening (m).
    pub x_s: f64,
}

impl RigState {
    /// Joint torque `R·f`.
    pub fn tau(&self, rig: &RigParams) -> f64 {
        rig.radius * self.f
    }

    /// Rest state at angle `q` with the cylinder holding gravity.
    pub fn at_rest(rig: &RigParams, q: f64) -> Self {
        Self { q, qd: 0.0, f: rig.gravity_torque_amp * q.sin() / rig.radius, x_s: 0.0 }
    }
}

#[derive(Clone, Copy)]
struct Deriv {
    q: f64,
    qd: f64,
    f: f64,
    x_s: f64,
}

fn derivative(rp: &RigParams, cp: &CylinderParams, s: &RigState, u: f64, tau_ext: f64) -> Deriv {
    let x = rp.piston_position(cp, s.q);
    let x_dot = rp.radius * s.qd;
    let torque = rp.radius * s.f - rp.damping * s.qd - rp.gravity_torque_amp * s.q.sin() + tau_ext;
    Deriv {
        q: s.qd,
        qd: torque / rp.inertia,
        f: force_rate(cp, s.f, x, x_dot, s.x_s),
        x_s: valve_rate(cp, s.x_s, u),
    }
}

fn offset(s: &RigState, d: &Deriv, h: f64) -> RigState {
    RigState { q: s.q + h * d.q, qd: s.qd + h * d.qd, f: s.f + h * d.f, x_s: s.x_s + h * d.x_s }
}

/// Advances the rig by `dt` using `substeps` RK4 steps of the coupled joint/cylinder state.
///
/// The valve command and external torque are held over the step. After each
/// substep the spool is saturated, the force is limited by the relief valve,
/// and the joint is clamped to its limits with the velocity zeroed on contact.
pub fn step_rig(
    rp: &RigParams,
    cp: &CylinderParams,
    state: &RigState,
    u: f64,
    tau_ext: f64,
    dt: f64,
    substeps: usize,
) -> Result<RigState, OracleError> {
    if !(dt > 0.0 && dt.is_finite()) || substeps == 0 {
        return Err(OracleError::Contract(format!("need dt > 0 and substeps >= 1, got dt={dt}, substeps={substeps}")));
    }
    let h = dt / substeps as f64;
    let relief = cp.relief_force();
    let mut s = *state;
    for _ in 0..substeps {
        let k1 = derivative(rp, cp, &s, u, tau_ext);
        let k2 = derivative(rp, cp, &offset(&s, &k1, 0.5 * h), u, tau_ext);
        let k3 = derivative(rp, cp, &offset(&s, &k2, 0.5 * h), u, tau_ext);
        let k4 = derivative(rp, cp, &offset(&s, &k3, h), u, tau_ext);
        let w = h / 6.0;
        s = RigState {
            q: s.q + w * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q),
            qd: s.qd + w * (k1.qd + 2.0 * k2.qd + 2.0 * k3.qd + k4.qd),
            f: (s.f + w * (k1.f + 2.0 * k2.f + 2.0 * k3.f + k4.f)).clamp(-relief, relief),
            x_s: (s.x_s + w * (k1.x_s + 2.0 * k2.x_s + 2.0 * k3.x_s + k4.x_s)).clamp(-cp.xs_max, cp.xs_max),
        };
        if s.q <= rp.q_min {
            s.q = rp.q_min;
            s.qd = s.qd.max(0.0);
        } else if s.q >= rp.q_max {
            s.q = rp.q_max;
            s.qd = s.qd.min(0.0);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hanging_equilibrium_is_fixed_point() {
        let rp = RigParams::default();
        let cp = CylinderParams::default();
        let s = RigState::default();
        let n = step_rig(&rp, &cp, &s, 0.0, 0.0, 1e-3, 10).unwrap();
        assert_eq!(n, s);
    }

    #[test]
    fn rest_state_holds_gravity() {
        let rp = RigParams::default();
        let cp = CylinderParams::default();
        let s = RigState::at_rest(&rp, 0.3);
        let mut n = s;
        for _ in 0..100 {
            n = step_rig(&rp, &cp, &n, 0.0, 0.0, 1e-3, 10).unwrap();
        }
        assert!((n.q - 0.3).abs() < 1e-9, "{}", n.q);
    }

    #[test]
    fn limits_clamp_and_stop() {
        let rp = RigParams::default();
        let cp = CylinderParams::default();
        let mut s = RigState::default();
        for _ in 0..3000 {
            s = step_rig(&rp, &cp, &s, cp.xs_max, 0.0, 1e-3, 10).unwrap();
            assert!(s.q <= rp.q_max && s.q >= rp.q_min);
        }
        assert_eq!(s.q, rp.q_max);
        assert!(s.qd <= 0.0);
    }

    #[test]
    fn limits_must_fit_stroke() {
        let cp = CylinderParams::default();
        let rp = RigParams { q_max: 2.5, ..Default::default() };
        assert!(rp.validate(&cp).is_err());
        assert!(RigParams::default().validate(&cp).is_ok());
    }
}
