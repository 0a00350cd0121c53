//! Target joint-angle profiles sampled at the command rate.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OracleError;

/// Trot phase offset of each leg; joints are numbered leg-major, three per leg.
const LEG_PHASE: [f64; 4] = [0.0, PI, PI, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommandProfile {
    Constant {
        value: f64,
    },
    Step {
        amplitude: f64,
        at: f64,
    },
    Sine {
        amplitude: f64,
        freq_hz: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Periodic gait-like motion: a few harmonics with per-joint random phases,
    /// trot-ordered legs and uniform per-tick jitter.
    Gait {
        amplitude: f64,
        freq_hz: f64,
        #[serde(default = "default_harmonics")]
        harmonics: usize,
        #[serde(default)]
        jitter: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn default_harmonics() -> usize {
    3
}

impl CommandProfile {
    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |msg: &str| Err(OracleError::Config(format!("profile: {msg}")));
        match *self {
            Self::Constant { value } if !value.is_finite() => bad("value must be finite"),
            Self::Step { amplitude, at } if !(amplitude.is_finite() && at.is_finite() && at >= 0.0) => {
                bad("step needs a finite amplitude and at >= 0")
            }
            Self::Sine { amplitude, freq_hz, offset, phase }
                if !([amplitude, offset, phase].iter().all(|v| v.is_finite()) && freq_hz.is_finite() && freq_hz >= 0.0) =>
            {
                bad("sine needs finite values and freq_hz >= 0")
            }
            Self::Gait { amplitude, freq_hz, harmonics, jitter, offset } => {
                if !(amplitude.is_finite() && offset.is_finite() && freq_hz.is_finite() && freq_hz > 0.0) {
                    bad("gait needs finite amplitude/offset and freq_hz > 0")
                } else if harmonics == 0 {
                    bad("gait needs at least one harmonic")
                } else if !(jitter.is_finite() && jitter >= 0.0) {
                    bad("gait jitter must be >= 0")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Target values for one joint at `n_ticks` command instants spaced `command_dt` apart.
    pub fn command_ticks<R: Rng>(
        &self,
        joint: usize,
        n_ticks: usize,
        command_dt: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>, OracleError> {
        self.validate()?;
        let t = |i: usize| i as f64 * command_dt;
        let ticks = match *self {
            Self::Constant { value } => vec![value; n_ticks],
            Self::Step { amplitude, at } => (0..n_ticks).map(|i| if t(i) >= at { amplitude } else { 0.0 }).collect(),
            Self::Sine { amplitude, freq_hz, offset, phase } => {
                (0..n_ticks).map(|i| offset + amplitude * (2.0 * PI * freq_hz * t(i) + phase).sin()).collect()
            }
            Self::Gait { amplitude, freq_hz, harmonics, jitter, offset } => {
                let leg_phase = LEG_PHASE[(joint / 3) % LEG_PHASE.len()];
                let terms: Vec<(f64, f64)> = (1..=harmonics)
                    .map(|h| (rng.random_range(0.5..1.0) / h as f64, rng.random_range(0.0..2.0 * PI)))
                    .collect();
                let norm: f64 = terms.iter().map(|(a, _)| a).sum();
                (0..n_ticks)
                    .map(|i| {
                        let wave: f64 = terms
                            .iter()
                            .enumerate()
                            .map(|(k, (a, phi))| {
                                a * (2.0 * PI * freq_hz * (k + 1) as f64 * t(i) + leg_phase * (k + 1) as f64 + phi).sin()
                            })
                            .sum();
                        let noise = if jitter > 0.0 { rng.random_range(-jitter..jitter) } else { 0.0 };
                        offset + amplitude * wave / norm + noise
                    })
                    .collect()
            }
        };
        Ok(ticks)
    }
}
