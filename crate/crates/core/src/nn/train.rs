use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gru, lstm, mlp, predict_sequence, Arch, Dataset, NetParams, NnError, TORQUE_SCALE};
use crate::log::TrajectoryLog;
use crate::metrics::TorquePredictor;

/// Time-major batch: `xs[t]` is `[streams × input]`, `ts[t]` is `[streams × output]`.
/// Feed-forward nets treat every row of every step as an independent sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqBatch {
    pub xs: Vec<Array2<f64>>,
    pub ts: Vec<Array2<f64>>,
}

impl SeqBatch {
    pub fn streams(&self) -> usize {
        self.xs.first().map_or(0, |x| x.nrows())
    }

    /// Number of scalar targets; the loss is their mean squared error.
    pub fn elements(&self) -> usize {
        self.ts.iter().map(|t| t.len()).sum()
    }

    fn validate(&self, net: &NetParams) -> Result<(), NnError> {
        if self.xs.is_empty() || self.xs.len() != self.ts.len() || self.streams() == 0 {
            return Err(NnError::Contract("batch needs matching, non-empty inputs and targets".into()));
        }
        let b = self.streams();
        let ok = self.xs.iter().all(|x| x.dim() == (b, net.dims.input))
            && self.ts.iter().all(|t| t.dim() == (b, net.dims.output));
        if !ok {
            return Err(NnError::Contract(format!(
                "batch shapes do not match {} ({}→{})",
                net.arch, net.dims.input, net.dims.output
            )));
        }
        Ok(())
    }
}

pub fn loss(net: &NetParams, batch: &SeqBatch) -> Result<f64, NnError> {
    batch.validate(net)?;
    Ok(match net.arch {
        Arch::Mlp => mlp::loss(net, batch),
        Arch::Lstm => lstm::loss(net, batch),
        Arch::Gru => gru::loss(net, batch),
    })
}

/// Mean squared error and its gradient with respect to every parameter.
pub fn loss_and_grad(net: &NetParams, batch: &SeqBatch) -> Result<(f64, Vec<f64>), NnError> {
    batch.validate(net)?;
    Ok(match net.arch {
        Arch::Mlp => mlp::loss_and_grad(net, batch),
        Arch::Lstm => lstm::loss_and_grad(net, batch),
        Arch::Gru => gru::loss_and_grad(net, batch),
    })
}

/// Largest `|ga − gn| / max(|ga|, |gn|, 1e-4·max|ga|)` over all parameters, with `gn`
/// from central differences of step `eps`.
pub fn gradient_check(net: &NetParams, batch: &SeqBatch, eps: f64) -> Result<f64, NnError> {
    let (_, analytic) = loss_and_grad(net, batch)?;
    // entries far below the largest gradient are swamped by finite-difference round-off
    let floor = analytic.iter().fold(1e-8f64, |m, g| m.max(1e-4 * g.abs()));
    let chunk = net.param_count().div_ceil(rayon::current_num_threads().max(1) * 4).max(1);
    let worst = (0..net.param_count())
        .collect::<Vec<_>>()
        .par_chunks(chunk)
        .map(|idx| {
            let mut probe = net.clone();
            let mut worst = 0.0f64;
            for &p in idx {
                let orig = probe.params[p];
                probe.params[p] = orig + eps;
                let up = loss(&probe, batch)?;
                probe.params[p] = orig - eps;
                let down = loss(&probe, batch)?;
                probe.params[p] = orig;
                let gn = (up - down) / (2.0 * eps);
                let ga = analytic[p];
                worst = worst.max((ga - gn).abs() / ga.abs().max(gn.abs()).max(floor));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>, NnError>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// Truncated-BPTT window for recurrent nets.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Windows drawn (once, seeded) from the log for recurrent training.
    #[serde(default = "default_max_windows")]
    pub max_windows: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_iterations() -> usize {
    1000
}

fn default_momentum() -> f64 {
    0.9
}

fn default_window() -> usize {
    50
}

fn default_max_windows() -> usize {
    64
}

impl TrainConfig {
    pub fn new(lr: f64, seed: u64) -> Self {
        Self {
            iterations: default_iterations(),
            lr,
            momentum: default_momentum(),
            window: default_window(),
            max_windows: default_max_windows(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(NnError::Contract(format!("lr must be >= 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NnError::Contract(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        if self.window == 0 || self.max_windows == 0 {
            return Err(NnError::Contract("window and max_windows must be >= 1".into()));
        }
        Ok(())
    }
}

/// The batch a full-batch training run sees. Feed-forward nets get every
/// frame; recurrent nets get up to `max_windows` non-overlapping windows,
/// chosen by seed and kept in time order.
pub fn training_batch(arch: Arch, data: &Dataset, cfg: &TrainConfig) -> Result<SeqBatch, NnError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NnError::Contract("empty dataset".into()));
    }
    if !arch.is_recurrent() {
        return Ok(SeqBatch { xs: vec![data.frames.clone()], ts: vec![data.targets.clone()] });
    }
    let n_windows = data.len() / cfg.window;
    if n_windows == 0 {
        return Err(NnError::Contract(format!("dataset of {} frames is shorter than one window", data.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picked = rand::seq::index::sample(&mut rng, n_windows, cfg.max_windows.min(n_windows)).into_vec();
    picked.sort_unstable();
    let (xs, ts) = (0..cfg.window)
        .map(|t| {
            let rows: Vec<usize> = picked.iter().map(|w| w * cfg.window + t).collect();
            (data.frames.select(Axis(0), &rows), data.targets.select(Axis(0), &rows))
        })
        .unzip();
    Ok(SeqBatch { xs, ts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub net: NetParams,
    /// Loss before each update, then the final loss (`iterations + 1` values).
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent with classical momentum on the MSE loss.
pub fn train(mut net: NetParams, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, NnError> {
    net.validate()?;
    let batch = training_batch(net.arch, data, cfg)?;
    let mut velocity = vec![0.0; net.param_count()];
    let mut losses = Vec::with_capacity(cfg.iterations + 1);
    for iteration in 0..cfg.iterations {
        let (l, g) = loss_and_grad(&net, &batch)?;
        if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(NnError::Diverged { iteration, loss: l });
        }
        losses.push(l);
        for ((p, v), gi) in net.params.iter_mut().zip(&mut velocity).zip(&g) {
            *v = cfg.momentum * *v - cfg.lr * gi;
            *p += *v;
        }
    }
    let last = loss(&net, &batch)?;
    if !last.is_finite() {
        return Err(NnError::Diverged { iteration: cfg.iterations, loss: last });
    }
    losses.push(last);
    Ok(TrainOutcome { net, losses })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTrial {
    pub lr: f64,
    /// `None` when the run diverged.
    pub final_loss: Option<f64>,
}

/// Trains once per learning rate from the same initial weights and returns
/// the rate with the lowest final training loss.
pub fn select_lr(
    net: &NetParams,
    data: &Dataset,
    cfg: &TrainConfig,
    grid: &[f64],
) -> Result<(f64, Vec<LrTrial>), NnError> {
    if grid.is_empty() {
        return Err(NnError::Contract("empty learning-rate grid".into()));
    }
    let trials = grid
        .par_iter()
        .map(|&lr| {
            let cfg = TrainConfig { lr, ..*cfg };
            match train(net.clone(), data, &cfg) {
                Ok(out) => Ok(LrTrial { lr, final_loss: out.losses.last().copied() }),
                Err(NnError::Diverged { .. }) => Ok(LrTrial { lr, final_loss: None }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>, NnError>>()?;
    let best = trials
        .iter()
        .filter_map(|t| t.final_loss.map(|l| (t.lr, l)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| NnError::Contract("every learning rate in the grid diverged".into()))?;
    Ok((best.0, trials))
}

/// A trained network used as a torque predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub net: NetParams,
    /// Chunk length for recurrent inference; matches the training window.
    pub window: usize,
}

impl TorquePredictor for Baseline {
    fn label(&self) -> String {
        self.net.arch.label().to_string()
    }

    fn predict_log(&self, log: &TrajectoryLog) -> Result<(Vec<f64>, Vec<f64>), String> {
        let data = super::dataset_from_log(log).map_err(|e| e.to_string())?;
        let out = predict_sequence(&self.net, data.frames.view(), self.window).map_err(|e| e.to_string())?;
        let pred = out.iter().map(|v| v * TORQUE_SCALE).collect();
        let actual = data.rows.iter().flat_map(|&t| log.records[t + 1].joints.iter().map(|s| s.tau)).collect();
        Ok((pred, actual))
    }
}
