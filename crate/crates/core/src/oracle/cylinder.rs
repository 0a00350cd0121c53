//! Nonlinear single-cylinder model with a first-order servo valve.
//!
//! Force dynamics `ḟ = g(x)·ẋ + h(f, x)·x_s` with
//!
//! ```text
//! g(x)    = −A²β (1/(V0A + A x) + 1/(V0B + A (L − x)))
//! h(f, x) = Cd w β A sqrt((PS − PT)/ρ − sgn(x_s) f/(ρA)) (1/(V0A + A x) + 1/(V0B + A (L − x)))
//! ```
//!
//! and valve dynamics `ẋ_s = (u − x_s)/τ_v` with the command and the spool
//! position saturated at `±xs_max`.

use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::actuator::sgn;

/// Physical parameters of one cylinder and its valve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderParams {
    /// Piston area (m²).
    pub area: f64,
    /// Stroke (m).
    pub stroke: f64,
    /// Bulk modulus (Pa).
    pub beta: f64,
    /// Oil density (kg/m³).
    pub rho: f64,
    /// Dead volume of chamber A (m³).
    pub v0a: f64,
    /// Dead volume of chamber B (m³).
    pub v0b: f64,
    /// Discharge coefficient.
    pub cd: f64,
    /// Valve area gradient (m).
    pub w: f64,
    /// Supply pressure (Pa).
    pub ps: f64,
    /// Return pressure (Pa).
    pub pt: f64,
    /// Valve time constant (s).
    pub tau_v: f64,
    /// Valve opening limit (m).
    pub xs_max: f64,
}

impl Default for CylinderParams {
    fn default() -> Self {
        Self {
            area: 1e-3,
            stroke: 0.2,
            beta: 1.5e9,
            rho: 870.0,
            v0a: 1e-5,
            v0b: 1e-5,
            cd: 0.6,
            w: 0.01,
            ps: 21e6,
            pt: 0.5e6,
            tau_v: 5e-3,
            xs_max: 5e-4,
        }
    }
}

impl CylinderParams {
    pub fn validate(&self) -> Result<(), OracleError> {
        let fields = [
            ("area", self.area),
            ("stroke", self.stroke),
            ("beta", self.beta),
            ("rho", self.rho),
            ("v0a", self.v0a),
            ("v0b", self.v0b),
            ("cd", self.cd),
            ("w", self.w),
            ("ps", self.ps),
            ("pt", self.pt),
            ("tau_v", self.tau_v),
            ("xs_max", self.xs_max),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(OracleError::Config(format!("cylinder.{name} must be finite and > 0, got {v}")));
            }
        }
        if self.ps <= self.pt {
            return Err(OracleError::Config("cylinder.ps must exceed cylinder.pt".into()));
        }
        Ok(())
    }

    /// Largest force the supply can hold statically, `A·(PS − PT)`.
    pub fn stall_force(&self) -> f64 {
        self.area * (self.ps - self.pt)
    }

    /// Relief-valve limit on `|f|`.
    pub fn relief_force(&self) -> f64 {
        self.area * self.ps
    }

    fn inverse_volumes(&self, x: f64) -> f64 {
        1.0 / (self.v0a + self.area * x) + 1.0 / (self.v0b + self.area * (self.stroke - x))
    }

    fn g_unchecked(&self, x: f64) -> f64 {
        -self.area * self.area * self.beta * self.inverse_volumes(x)
    }

    fn h_unchecked(&self, f: f64, x: f64, xs_sign: f64) -> f64 {
        let radicand = (self.ps - self.pt) / self.rho - xs_sign * f / (self.rho * self.area);
        self.cd * self.w * self.beta * self.area * radicand.max(0.0).sqrt() * self.inverse_volumes(x)
    }

    fn force_rate(&self, f: f64, x: f64, x_dot: f64, x_s: f64) -> f64 {
        let x = x.clamp(0.0, self.stroke);
        self.g_unchecked(x) * x_dot + self.h_unchecked(f, x, sgn(x_s)) * x_s
    }

    fn valve_rate(&self, x_s: f64, u: f64) -> f64 {
        (u.clamp(-self.xs_max, self.xs_max) - x_s) / self.tau_v
    }
}

/// Returns `(g(x), h(f, x))` for the given valve direction.
pub fn flow_coefficients(p: &CylinderParams, f: f64, x: f64, xs_sign: i8) -> Result<(f64, f64), OracleError> {
    if !(0.0..=p.stroke).contains(&x) {
        return Err(OracleError::Domain(format!("piston position {x} outside [0, {}]", p.stroke)));
    }
    if !matches!(xs_sign, -1..=1) {
        return Err(OracleError::Domain(format!("valve sign must be -1, 0 or 1, got {xs_sign}")));
    }
    Ok((p.g_unchecked(x), p.h_unchecked(f, x, xs_sign as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CylinderState {
    /// Piston position (m) in `[0, L]`.
    pub x: f64,
    /// Piston velocity (m/s).
    pub x_dot: f64,
    /// Actuator force (N).
    pub f: f64,
    /// Valve opening (m).
    pub x_s: f64,
}

/// One RK4 step of force and valve with the piston velocity imposed over the step.
pub fn step_cylinder(
    p: &CylinderParams,
    s: &CylinderState,
    u: f64,
    x_dot: f64,
    dt: f64,
) -> Result<CylinderState, OracleError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(OracleError::Contract(format!("dt must be > 0, got {dt}")));
    }
    let rate = |tau: f64, f: f64, x_s: f64| -> (f64, f64) {
        let x = s.x + x_dot * tau;
        (p.force_rate(f, x, x_dot, x_s), p.valve_rate(x_s, u))
    };
    let h = dt;
    let (k1f, k1s) = rate(0.0, s.f, s.x_s);
    let (k2f, k2s) = rate(0.5 * h, s.f + 0.5 * h * k1f, s.x_s + 0.5 * h * k1s);
    let (k3f, k3s) = rate(0.5 * h, s.f + 0.5 * h * k2f, s.x_s + 0.5 * h * k2s);
    let (k4f, k4s) = rate(h, s.f + h * k3f, s.x_s + h * k3s);
    let relief = p.relief_force();
    Ok(CylinderState {
        x: (s.x + x_dot * h).clamp(0.0, p.stroke),
        x_dot,
        f: (s.f + h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)).clamp(-relief, relief),
        x_s: (s.x_s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)).clamp(-p.xs_max, p.xs_max),
    })
}

pub(crate) fn force_rate(p: &CylinderParams, f: f64, x: f64, x_dot: f64, x_s: f64) -> f64 {
    p.force_rate(f, x, x_dot, x_s)
}

pub(crate) fn valve_rate(p: &CylinderParams, x_s: f64, u: f64) -> f64 {
    p.valve_rate(x_s, u)
}
