//! Simplified analytical actuator model.
//!
//! The model predicts the next-step actuator output from the current measured
//! output, the commanded displacement and the current velocity. It is written
//! once in force/linear form ([`predict_force_delta`]) and once in joint space
//! ([`predict_torque_next`]) through the sprocket relations `τ = R·f`,
//! `x = R·q`, `ẋ = R·q̇`.
//!
//! The per-step time is folded into the coefficients: every call advances the
//! actuator by one 1 ms control tick.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of actuated joints on the robot.
pub const NUM_JOINTS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid coefficients: {0}")]
    InvalidCoeffs(String),
    #[error("contract error: {0}")]
    Contract(String),
}

/// Identified coefficients of one actuator plus its sprocket radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorCoeffs {
    /// Stiffness-like gain on the commanded displacement.
    pub k1: f64,
    /// Fraction of the current output lost per step, in `[0, 1)`.
    pub k2: f64,
    /// Viscous resistance gain.
    pub k3: f64,
    /// Impact-correction gain.
    pub k4: f64,
    /// Sprocket radius (m).
    #[serde(rename = "R")]
    pub r: f64,
}

impl ActuatorCoeffs {
    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64, r: f64) -> Result<Self, ModelError> {
        let c = Self { k1, k2, k3, k4, r };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [("k1", self.k1), ("k2", self.k2), ("k3", self.k3), ("k4", self.k4), ("R", self.r)];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::InvalidCoeffs(format!("{name} is not finite")));
        }
        if self.r <= 0.0 {
            return Err(ModelError::InvalidCoeffs(format!("R must be > 0, got {}", self.r)));
        }
        if self.k1 < 0.0 || self.k3 < 0.0 || self.k4 < 0.0 {
            return Err(ModelError::InvalidCoeffs("k1, k3 and k4 must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.k2) {
            return Err(ModelError::InvalidCoeffs(format!("k2 must lie in [0, 1), got {}", self.k2)));
        }
        Ok(())
    }
}

/// One joint's state at a control tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointSnapshot {
    /// Joint angle (rad).
    pub q: f64,
    /// Target joint angle (rad).
    pub q_des: f64,
    /// Joint angular velocity (rad/s).
    pub qd: f64,
    /// Measured joint torque (N·m).
    pub tau: f64,
}

impl JointSnapshot {
    pub fn new(q: f64, q_des: f64, qd: f64, tau: f64) -> Self {
        Self { q, q_des, qd, tau }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.q_des.is_finite() && self.qd.is_finite() && self.tau.is_finite()
    }
}

/// Physical constants behind the impact correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactParams {
    /// Fluid bulk modulus (Pa).
    pub bulk_modulus: f64,
    /// Effective piston area (m²).
    pub area: f64,
    /// Chamber volume (m³).
    pub volume: f64,
    /// Maximum actuator force (N).
    pub f_max: f64,
}

impl ImpactParams {
    pub fn new(bulk_modulus: f64, area: f64, volume: f64, f_max: f64) -> Result<Self, ModelError> {
        let p = Self { bulk_modulus, area, volume, f_max };
        let ok = [bulk_modulus, area, volume, f_max].iter().all(|v| v.is_finite() && *v > 0.0);
        if !ok {
            return Err(ModelError::InvalidCoeffs("impact parameters must be finite and > 0".into()));
        }
        Ok(p)
    }

    /// Gain `B·A² / (V·f_max)`.
    pub fn gain(&self) -> f64 {
        self.bulk_modulus * self.area * self.area / (self.volume * self.f_max)
    }
}

/// Sign with `sgn(0) = 0`.
#[inline(always)]
pub fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `Δx · max(−f·sgn(Δx), 0)`; nonzero only when the output opposes the commanded displacement.
#[inline(always)]
pub fn impact_term(delta: f64, output: f64) -> f64 {
    delta * (-output * sgn(delta)).max(0.0)
}

/// Force change over one step in linear coordinates.
pub fn predict_force_delta(
    coeffs: &ActuatorCoeffs,
    f: f64,
    x: f64,
    x_des: f64,
    x_dot: f64,
) -> Result<f64, ModelError> {
    if !(f.is_finite() && x.is_finite() && x_des.is_finite() && x_dot.is_finite()) {
        return Err(ModelError::Domain("non-finite input to force model".into()));
    }
    let dx = x_des - x;
    Ok(coeffs.k1 * dx - coeffs.k2 * f - coeffs.k3 * x_dot + coeffs.k4 * impact_term(dx, f))
}

#[inline(always)]
fn torque_next_unchecked(c: &ActuatorCoeffs, s: &JointSnapshot) -> f64 {
    let dq = s.q_des - s.q;
    let r2 = c.r * c.r;
    c.k1 * r2 * dq + (1.0 - c.k2) * s.tau - c.k3 * r2 * s.qd + c.k4 * c.r * impact_term(dq, s.tau)
}

/// Next-step joint torque predicted from the current snapshot.
#[inline]
pub fn predict_torque_next(coeffs: &ActuatorCoeffs, s: &JointSnapshot) -> Result<f64, ModelError> {
    if !s.is_finite() {
        return Err(ModelError::Domain("non-finite joint snapshot".into()));
    }
    Ok(torque_next_unchecked(coeffs, s))
}

/// Predicts all twelve actuators at once. Works on the stack only.
#[inline]
pub fn predict_batch12(
    coeffs: &[ActuatorCoeffs],
    states: &[JointSnapshot],
) -> Result<[f64; NUM_JOINTS], ModelError> {
    if coeffs.len() != NUM_JOINTS || states.len() != NUM_JOINTS {
        return Err(ModelError::Contract(format!(
            "expected {NUM_JOINTS} coefficient sets and snapshots, got {} and {}",
            coeffs.len(),
            states.len()
        )));
    }
    let mut out = [0.0; NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        if !states[i].is_finite() {
            return Err(ModelError::Domain(format!("non-finite snapshot for joint {i}")));
        }
        out[i] = torque_next_unchecked(&coeffs[i], &states[i]);
    }
    Ok(out)
}

/// Impact correction force `B·A²/(V·f_max)·f·Δx`, active only when `f·Δx < 0`.
pub fn impact_correction(p: &ImpactParams, f: f64, dx: f64) -> f64 {
    if f * dx < 0.0 {
        p.gain() * f * dx
    } else {
        0.0
    }
}

/// JSON record of one joint's coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointCoeffsRecord {
    pub joint_id: usize,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

/// Serializes twelve coefficient sets as a JSON array of joint records.
pub fn coeffs_to_json(coeffs: &[ActuatorCoeffs]) -> Result<String, ModelError> {
    if coeffs.len() != NUM_JOINTS {
        return Err(ModelError::Contract(format!("expected {NUM_JOINTS} coefficient sets, got {}", coeffs.len())));
    }
    let records: Vec<JointCoeffsRecord> = coeffs
        .iter()
        .enumerate()
        .map(|(joint_id, c)| JointCoeffsRecord { joint_id, k1: c.k1, k2: c.k2, k3: c.k3, k4: c.k4, r: c.r })
        .collect();
    serde_json::to_string_pretty(&records).map_err(|e| ModelError::Contract(e.to_string()))
}

/// Parses and validates a JSON array of twelve joint records, returned in joint order.
pub fn coeffs_from_json(text: &str) -> Result<Vec<ActuatorCoeffs>, ModelError> {
    let records: Vec<JointCoeffsRecord> =
        serde_json::from_str(text).map_err(|e| ModelError::Contract(format!("coefficient JSON: {e}")))?;
    if records.len() != NUM_JOINTS {
        return Err(ModelError::Contract(format!("expected {NUM_JOINTS} joint records, got {}", records.len())));
    }
    let mut out: Vec<Option<ActuatorCoeffs>> = vec![None; NUM_JOINTS];
    for rec in records {
        if rec.joint_id >= NUM_JOINTS {
            return Err(ModelError::Contract(format!("joint_id {} out of range", rec.joint_id)));
        }
        if out[rec.joint_id].is_some() {
            return Err(ModelError::Contract(format!("duplicate joint_id {}", rec.joint_id)));
        }
        out[rec.joint_id] = Some(ActuatorCoeffs::new(rec.k1, rec.k2, rec.k3, rec.k4, rec.r)?);
    }
    Ok(out.into_iter().map(|c| c.expect("all joints present")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coeffs(k1: f64, k2: f64, k3: f64, k4: f64, r: f64) -> ActuatorCoeffs {
        ActuatorCoeffs::new(k1, k2, k3, k4, r).unwrap()
    }

    #[test]
    fn force_delta_vanishes_at_rest() {
        let c = coeffs(1000.0, 0.02, 10.0, 5.0, 0.05);
        assert_eq!(predict_force_delta(&c, 0.0, 0.3, 0.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn force_delta_hand_values() {
        let c = coeffs(1000.0, 0.02, 10.0, 0.0, 0.05);
        let d = predict_force_delta(&c, 100.0, 0.0, 0.01, 0.1).unwrap();
        assert!((d - 7.0).abs() < 1e-12, "{d}");

        let c = coeffs(0.0, 0.0, 0.0, 50.0, 0.05);
        let d = predict_force_delta(&c, -100.0, 0.0, 0.01, 0.0).unwrap();
        assert!((d - 50.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn force_delta_rejects_nan() {
        let c = coeffs(1.0, 0.0, 0.0, 0.0, 0.05);
        assert!(matches!(predict_force_delta(&c, f64::NAN, 0.0, 0.0, 0.0), Err(ModelError::Domain(_))));
    }

    #[test]
    fn torque_next_hand_values() {
        let c = coeffs(4e5, 0.02, 1e3, 0.0, 0.05);
        let s = JointSnapshot::new(1.0, 1.01, 0.1, 100.0);
        let t = predict_torque_next(&c, &s).unwrap();
        assert!((t - 107.75).abs() < 1e-9, "{t}");

        let c = coeffs(0.0, 0.0, 0.0, 50.0, 0.05);
        let s = JointSnapshot::new(1.0, 1.01, 0.0, -100.0);
        let t = predict_torque_next(&c, &s).unwrap();
        assert!((t + 97.5).abs() < 1e-9, "{t}");

        let s = JointSnapshot::new(0.4, 0.4, 0.0, 0.0);
        assert_eq!(predict_torque_next(&c, &s).unwrap(), 0.0);
    }

    #[test]
    fn torque_next_rejects_infinite() {
        let c = coeffs(1.0, 0.0, 0.0, 0.0, 0.05);
        let s = JointSnapshot::new(0.0, f64::INFINITY, 0.0, 0.0);
        assert!(predict_torque_next(&c, &s).is_err());
    }

    #[test]
    fn batch_identity_and_replication() {
        let c = [coeffs(4e5, 0.02, 1e3, 0.0, 0.05); NUM_JOINTS];
        let zeros = [JointSnapshot::new(0.7, 0.7, 0.0, 0.0); NUM_JOINTS];
        assert_eq!(predict_batch12(&c, &zeros).unwrap(), [0.0; NUM_JOINTS]);
        let s = [JointSnapshot::new(1.0, 1.01, 0.1, 100.0); NUM_JOINTS];
        for v in predict_batch12(&c, &s).unwrap() {
            assert!((v - 107.75).abs() < 1e-9);
        }
    }

    #[test]
    fn batch_length_mismatch() {
        let c = [coeffs(1.0, 0.0, 0.0, 0.0, 0.05); 11];
        let s = [JointSnapshot::default(); NUM_JOINTS];
        assert!(matches!(predict_batch12(&c, &s), Err(ModelError::Contract(_))));
    }

    #[test]
    fn impact_correction_cases() {
        let p = ImpactParams::new(1.5e9, 1e-3, 1e-4, 1.5e4).unwrap();
        assert_eq!(impact_correction(&p, 0.0, 1e-3), 0.0);
        assert_eq!(impact_correction(&p, 1e3, 0.0), 0.0);
        assert_eq!(impact_correction(&p, 1e3, 1e-3), 0.0);
        let v = impact_correction(&p, -1e3, 1e-3);
        assert!((v + 1000.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn invalid_coefficients() {
        assert!(ActuatorCoeffs::new(1.0, 1.0, 0.0, 0.0, 0.05).is_err());
        assert!(ActuatorCoeffs::new(-1.0, 0.0, 0.0, 0.0, 0.05).is_err());
        assert!(ActuatorCoeffs::new(1.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(ImpactParams::new(1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn json_roundtrip_and_schema() {
        let cs: Vec<_> = (0..NUM_JOINTS).map(|j| coeffs(1e5 + j as f64, 0.01, 10.0, 0.5, 0.05)).collect();
        let text = coeffs_to_json(&cs).unwrap();
        assert!(text.contains("\"joint_id\": 11"));
        assert!(text.contains("\"R\""));
        assert_eq!(coeffs_from_json(&text).unwrap(), cs);
        assert!(coeffs_from_json("[]").is_err());
    }

    fn arb_coeffs() -> impl Strategy<Value = ActuatorCoeffs> {
        (0.0..1e6f64, 0.0..0.5f64, 0.0..1e4f64, 0.0..100.0f64, 0.01..0.2f64)
            .prop_map(|(k1, k2, k3, k4, r)| coeffs(k1, k2, k3, k4, r))
    }

    fn arb_snapshot() -> impl Strategy<Value = JointSnapshot> {
        (-2.0..2.0f64, -0.2..0.2f64, -5.0..5.0f64, -500.0..500.0f64)
            .prop_map(|(q, dq, qd, tau)| JointSnapshot::new(q, q + dq, qd, tau))
    }

    proptest! {
        #[test]
        fn impact_zero_when_aligned(c in arb_coeffs(), s in arb_snapshot()) {
            let dq = s.q_des - s.q;
            if s.tau * sgn(dq) >= 0.0 {
                prop_assert_eq!(impact_term(dq, s.tau), 0.0);
                let mut no_impact = c;
                no_impact.k4 = 0.0;
                prop_assert_eq!(predict_torque_next(&c, &s).unwrap(), predict_torque_next(&no_impact, &s).unwrap());
            }
        }

        #[test]
        fn torque_delta_linear_in_displacement(
            k1 in 0.0..1e6f64, r in 0.01..0.2f64, s in arb_snapshot(), alpha in -3.0..3.0f64
        ) {
            let c = coeffs(k1, 0.0, 0.0, 0.0, r);
            let dq = s.q_des - s.q;
            let base = predict_torque_next(&c, &s).unwrap() - s.tau;
            let scaled = JointSnapshot::new(0.0, alpha * dq, s.qd, s.tau);
            let got = predict_torque_next(&c, &scaled).unwrap() - s.tau;
            // subtracting τ back out costs a few ulps of |τ|
            let tol = 1e-12 * (1.0 + (alpha * base).abs()) + 4.0 * f64::EPSILON * s.tau.abs() * (1.0 + alpha.abs());
            prop_assert!((got - alpha * base).abs() <= tol);
        }

        #[test]
        fn batch_matches_scalar_bitwise(c in arb_coeffs(), s in arb_snapshot()) {
            let cs = [c; NUM_JOINTS];
            let ss = [s; NUM_JOINTS];
            let batch = predict_batch12(&cs, &ss).unwrap();
            let single = predict_torque_next(&c, &s).unwrap();
            for v in batch {
                prop_assert_eq!(v.to_bits(), single.to_bits());
            }
        }
    }
}
