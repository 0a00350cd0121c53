//! Run configuration: one JSON document drives every subcommand.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{LoopConfig, LoopMode, RigSim};
use crate::metrics::DEFAULT_THRESHOLD;
use crate::nn::{Arch, TrainConfig};
use crate::oracle::{CommandProfile, ImpactLoad, RigParams, Scenario, SensorNoise, SimSetup};
use crate::reward::RewardCoeffs;
use crate::sysid::FitOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Learning rate per architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchRates {
    pub mlp: f64,
    pub lstm: f64,
    pub gru: f64,
}

impl ArchRates {
    pub fn get(&self, arch: Arch) -> f64 {
        match arch {
            Arch::Mlp => self.mlp,
            Arch::Lstm => self.lstm,
            Arch::Gru => self.gru,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default = "default_archs")]
    pub archs: Vec<Arch>,
    pub iterations: usize,
    pub momentum: f64,
    pub window: usize,
    pub max_windows: usize,
    /// Rates picked from `lr_grid` on the default training log.
    pub lr: ArchRates,
    pub lr_grid: Vec<f64>,
}

fn default_archs() -> Vec<Arch> {
    Arch::ALL.to_vec()
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            archs: default_archs(),
            iterations: 1000,
            momentum: 0.9,
            window: 50,
            max_windows: 64,
            lr: ArchRates { mlp: 1.0, lstm: 3.0, gru: 1.0 },
            lr_grid: vec![0.03, 0.1, 0.3, 1.0, 3.0, 10.0],
        }
    }
}

impl BaselineConfig {
    pub fn train_config(&self, arch: Arch, seed: u64) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            lr: self.lr.get(arch),
            momentum: self.momentum,
            window: self.window,
            max_windows: self.max_windows,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// |τ| threshold for the thresholded metrics (N·m).
    pub threshold: f64,
    pub hist_bins: [usize; 2],
    pub bench_iters: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, hist_bins: [64, 64], bench_iters: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub setup: SimSetup,
    /// Rig and torque loop for the control-mode comparison; the position
    /// loop is `setup.position_loop`.
    pub control_rig: RigParams,
    pub torque_loop: LoopConfig,
    /// Impact-poor log the model and baselines are fitted on.
    pub train: Scenario,
    /// Held-out logs, one column group each in the table.
    pub eval: Vec<Scenario>,
    /// Impact-rich log for the out-of-distribution comparison.
    pub ood: Scenario,
    pub fit: FitOptions,
    pub baselines: BaselineConfig,
    pub metrics: EvalConfig,
    pub reward: RewardCoeffs,
}

fn gait(amplitude: f64, freq_hz: f64, offset: f64) -> CommandProfile {
    CommandProfile::Gait { amplitude, freq_hz, harmonics: 3, jitter: 0.005, offset }
}

fn scenario(name: &str, profile: CommandProfile, seed_offset: u64) -> Scenario {
    Scenario {
        name: name.to_string(),
        duration: 20.0,
        profile,
        gravity_scale: 1.0,
        damping_scale: 1.0,
        inertia_scale: 1.0,
        impacts: None,
        noise: SensorNoise { q: 1e-5, qd: 1e-3, tau: 0.2 },
        seed_offset,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let walk = |name: &str, amplitude, freq_hz, seed_offset| scenario(name, gait(amplitude, freq_hz, 0.2), seed_offset);
        Self {
            seed: 7,
            setup: SimSetup::default(),
            control_rig: RigParams::default(),
            torque_loop: LoopConfig::default_torque(),
            train: walk("train", 0.3, 1.5, 0),
            eval: vec![
                walk("walk-0.4", 0.15, 1.0, 1),
                walk("walk-1.0a", 0.3, 1.5, 2),
                walk("walk-1.0b", 0.3, 1.6, 3),
                walk("walk-1.0c", 0.35, 1.5, 4),
                walk("walk-1.0d", 0.3, 1.4, 5),
            ],
            ood: Scenario {
                gravity_scale: 1.6,
                impacts: Some(ImpactLoad { rate_hz: 3.0, magnitude: -250.0, duration: 0.06 }),
                ..walk("impact-rich", 0.3, 1.5, 6)
            },
            fit: FitOptions::default(),
            baselines: BaselineConfig::default(),
            metrics: EvalConfig::default(),
            reward: RewardCoeffs::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn control_sim(&self) -> RigSim {
        RigSim { rig: self.control_rig, cylinder: self.setup.cylinder, substeps: self.setup.substeps }
    }

    pub fn radii(&self) -> Vec<f64> {
        self.setup.rigs.iter().map(|r| r.radius).collect()
    }

    pub fn scenarios(&self) -> impl Iterator<Item = &Scenario> {
        std::iter::once(&self.train).chain(&self.eval).chain(std::iter::once(&self.ood))
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios().find(|s| s.name == name)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.setup.validate().map_err(|e| ConfigError::Invalid(format!("setup: {e}")))?;
        self.control_rig.validate(&self.setup.cylinder).map_err(|e| ConfigError::Invalid(format!("control_rig: {e}")))?;
        if self.torque_loop.mode != LoopMode::Torque {
            return bad("torque_loop.mode must be \"torque\"".into());
        }
        self.torque_loop.validate().map_err(|e| ConfigError::Invalid(format!("torque_loop: {e}")))?;
        if self.eval.is_empty() {
            return bad("eval needs at least one scenario".into());
        }
        let mut names = HashSet::new();
        for s in self.scenarios() {
            s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if s.name.is_empty() || s.name.contains(['/', '\\', ',']) || s.name.starts_with('.') {
                return bad(format!("scenario name {:?} is not usable as a file name", s.name));
            }
            if !names.insert(s.name.as_str()) {
                return bad(format!("duplicate scenario name {:?}", s.name));
            }
        }
        self.fit.validate().map_err(|e| ConfigError::Invalid(format!("fit: {e}")))?;
        let b = &self.baselines;
        if b.archs.is_empty() {
            return bad("baselines.archs is empty".into());
        }
        for &arch in &b.archs {
            b.train_config(arch, 0).validate().map_err(|e| ConfigError::Invalid(format!("baselines ({arch}): {e}")))?;
        }
        if b.iterations == 0 {
            return bad("baselines.iterations must be >= 1".into());
        }
        if b.lr_grid.is_empty() || b.lr_grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("baselines.lr_grid needs positive finite rates".into());
        }
        let m = &self.metrics;
        if !(m.threshold.is_finite() && m.threshold >= 0.0) {
            return bad("metrics.threshold must be >= 0".into());
        }
        if m.hist_bins.contains(&0) || m.bench_iters == 0 {
            return bad("metrics.hist_bins and metrics.bench_iters must be >= 1".into());
        }
        self.reward.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert_eq!(cfg.scenarios().count(), 7);
    }

    #[test]
    fn unknown_field_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::default().to_json()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(matches!(RunConfig::from_json(&v.to_string()), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut cfg = RunConfig::default();
        cfg.eval[1].name = cfg.eval[0].name.clone();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(m)) if m.contains("duplicate")));
    }

    #[test]
    fn wrong_loop_mode_rejected() {
        let mut cfg = RunConfig::default();
        cfg.torque_loop.mode = LoopMode::Position;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.reward.c_f = 2.0;
        assert!(cfg.validate().is_err());
    }
}
