//! MLP, LSTM and GRU torque predictors with hand-written backpropagation.
//!
//! All three share a flat `f64` parameter vector addressed through a fixed
//! tensor layout (see [`layout`]). Networks work in scaled units: torque
//! inputs and targets are divided by [`TORQUE_SCALE`].

mod features;
mod gru;
mod lstm;
mod mlp;
mod params;
mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use features::{dataset_from_log, frame_features, Dataset, FEATURES_PER_JOINT};
pub use params::{layout, read_weights, write_weights, NetParams, TensorSpec, WEIGHTS_MAGIC};
pub use train::{
    gradient_check, loss, loss_and_grad, select_lr, train, training_batch, Baseline, LrTrial, SeqBatch, TrainConfig,
    TrainOutcome,
};

/// Torque divisor applied to network inputs and targets.
pub const TORQUE_SCALE: f64 = 100.0;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{0}")]
    Contract(String),
    #[error("training diverged at iteration {iteration} (loss {loss})")]
    Diverged { iteration: usize, loss: f64 },
    #[error("weights file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Mlp,
    Lstm,
    Gru,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::Mlp, Arch::Lstm, Arch::Gru];

    pub fn is_recurrent(self) -> bool {
        self != Arch::Mlp
    }

    pub fn label(self) -> &'static str {
        match self {
            Arch::Mlp => "MLP",
            Arch::Lstm => "LSTM",
            Arch::Gru => "GRU",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Mlp => "mlp",
            Arch::Lstm => "lstm",
            Arch::Gru => "gru",
        })
    }
}

impl FromStr for Arch {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(Arch::Mlp),
            "lstm" => Ok(Arch::Lstm),
            "gru" => Ok(Arch::Gru),
            other => Err(NnError::Contract(format!("unknown architecture '{other}' (expected mlp, lstm or gru)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

/// Input 48, hidden 64, output 12.
pub const BASELINE_DIMS: Dims = Dims { input: 48, hidden: 64, output: 12 };

/// Recurrent state for a batch of independent streams, `[streams × hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    pub h: Array2<f64>,
    /// Cell state; LSTM only (empty otherwise).
    pub c: Array2<f64>,
}

impl NetState {
    pub fn zeros(net: &NetParams, streams: usize) -> Self {
        let hd = net.dims.hidden;
        let c = if net.arch == Arch::Lstm { Array2::zeros((streams, hd)) } else { Array2::zeros((0, 0)) };
        let h = if net.arch.is_recurrent() { Array2::zeros((streams, hd)) } else { Array2::zeros((0, 0)) };
        Self { h, c }
    }
}

/// One step for a batch of streams: `x` is `[streams × input]`, the result `[streams × output]`.
pub fn forward_batch(net: &NetParams, x: ArrayView2<'_, f64>, state: &mut NetState) -> Result<Array2<f64>, NnError> {
    if x.ncols() != net.dims.input {
        return Err(NnError::Contract(format!("frame width {} != input size {}", x.ncols(), net.dims.input)));
    }
    let streams = x.nrows();
    let want = if net.arch.is_recurrent() { (streams, net.dims.hidden) } else { (0, 0) };
    if state.h.dim() != want || (net.arch == Arch::Lstm && state.c.dim() != want) {
        return Err(NnError::Contract(format!("state shape {:?} does not match {want:?}", state.h.dim())));
    }
    Ok(match net.arch {
        Arch::Mlp => mlp::forward(net, x).1,
        Arch::Lstm => {
            let step = lstm::step(net, x, state.h.view(), state.c.view());
            state.h = step.h.clone();
            state.c = step.c.clone();
            step.y
        }
        Arch::Gru => {
            let step = gru::step(net, x, state.h.view());
            state.h = step.h.clone();
            step.y
        }
    })
}

/// One step for a single stream.
pub fn forward(net: &NetParams, frame: &[f64], state: &mut NetState) -> Result<Vec<f64>, NnError> {
    let x = ArrayView2::from_shape((1, frame.len()), frame).map_err(|e| NnError::Contract(e.to_string()))?;
    Ok(forward_batch(net, x, state)?.into_raw_vec_and_offset().0)
}

/// Outputs for a time-ordered sequence of frames (`[N × input]`).
///
/// Recurrent nets run the sequence in consecutive chunks of `window`
/// frames, each from a zero state, which is how they are trained.
pub fn predict_sequence(net: &NetParams, frames: ArrayView2<'_, f64>, window: usize) -> Result<Array2<f64>, NnError> {
    if frames.ncols() != net.dims.input {
        return Err(NnError::Contract(format!("frame width {} != input size {}", frames.ncols(), net.dims.input)));
    }
    let n = frames.nrows();
    if !net.arch.is_recurrent() {
        return Ok(mlp::forward(net, frames).1);
    }
    if window == 0 {
        return Err(NnError::Contract("window must be >= 1".into()));
    }
    let mut out = Array2::zeros((n, net.dims.output));
    let chunks = n / window;
    // full chunks advance together as parallel streams
    if chunks > 0 {
        let mut state = NetState::zeros(net, chunks);
        for t in 0..window {
            let rows: Vec<usize> = (0..chunks).map(|k| k * window + t).collect();
            let x = frames.select(ndarray::Axis(0), &rows);
            let y = forward_batch(net, x.view(), &mut state)?;
            for (k, &r) in rows.iter().enumerate() {
                out.row_mut(r).assign(&y.row(k));
            }
        }
    }
    let mut state = NetState::zeros(net, 1);
    for r in chunks * window..n {
        let y = forward_batch(net, frames.slice(ndarray::s![r..r + 1, ..]), &mut state)?;
        out.row_mut(r).assign(&y.row(0));
    }
    Ok(out)
}
