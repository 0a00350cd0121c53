use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Arch, Dims, NnError};

/// First four bytes of a weights file.
pub const WEIGHTS_MAGIC: &[u8; 4] = b"HDNN";

/// One tensor inside the flat parameter vector, stored row-major.
/// Biases are `[n, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tensor order per architecture:
///
/// * MLP: `w1 [H×I]`, `b1 [H]`, `w2 [O×H]`, `b2 [O]`
/// * LSTM: `w_ih [4H×I]`, `w_hh [4H×H]`, `b [4H]`, `w_out [O×H]`, `b_out [O]`; gate blocks i, f, g, o
/// * GRU: `w_ih [3H×I]`, `w_hh [3H×H]`, `b_ih [3H]`, `b_hh [3H]`, `w_out [O×H]`, `b_out [O]`; gate blocks r, z, n
pub fn layout(arch: Arch, d: Dims) -> Vec<TensorSpec> {
    let (i, h, o) = (d.input, d.hidden, d.output);
    let shapes: Vec<(&str, usize, usize)> = match arch {
        Arch::Mlp => vec![("w1", h, i), ("b1", h, 1), ("w2", o, h), ("b2", o, 1)],
        Arch::Lstm => vec![("w_ih", 4 * h, i), ("w_hh", 4 * h, h), ("b", 4 * h, 1), ("w_out", o, h), ("b_out", o, 1)],
        Arch::Gru => vec![
            ("w_ih", 3 * h, i),
            ("w_hh", 3 * h, h),
            ("b_ih", 3 * h, 1),
            ("b_hh", 3 * h, 1),
            ("w_out", o, h),
            ("b_out", o, 1),
        ],
    };
    let mut offset = 0;
    shapes
        .into_iter()
        .map(|(name, rows, cols)| {
            let spec = TensorSpec { name: name.to_string(), rows, cols, offset };
            offset += rows * cols;
            spec
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub arch: Arch,
    pub dims: Dims,
    pub layout: Vec<TensorSpec>,
    pub params: Vec<f64>,
}

impl NetParams {
    pub fn zeros(arch: Arch, dims: Dims) -> Self {
        let layout = layout(arch, dims);
        let n = layout.iter().map(TensorSpec::len).sum();
        Self { arch, dims, layout, params: vec![0.0; n] }
    }

    /// Uniform `±1/sqrt(fan_in)` initialization. The hidden layer of the MLP
    /// uses the input width as fan-in; every other tensor uses the hidden width.
    pub fn init(arch: Arch, dims: Dims, seed: u64) -> Self {
        let mut net = Self::zeros(arch, dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (k, spec) in net.layout.iter().enumerate() {
            let fan_in = if arch == Arch::Mlp && k < 2 { dims.input } else { dims.hidden };
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in &mut net.params[spec.offset..spec.offset + spec.len()] {
                *v = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let expect = layout(self.arch, self.dims);
        if self.layout != expect {
            return Err(NnError::Contract(format!("{} layout does not match its dimensions", self.arch)));
        }
        let n: usize = expect.iter().map(TensorSpec::len).sum();
        if self.params.len() != n {
            return Err(NnError::Contract(format!("{} expects {n} parameters, got {}", self.arch, self.params.len())));
        }
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(NnError::Contract("non-finite parameter".into()));
        }
        Ok(())
    }

    pub(super) fn mat(&self, k: usize) -> ArrayView2<'_, f64> {
        let s = &self.layout[k];
        ArrayView2::from_shape((s.rows, s.cols), &self.params[s.offset..s.offset + s.len()]).expect("layout")
    }

    pub(super) fn vec(&self, k: usize) -> ArrayView1<'_, f64> {
        let s = &self.layout[k];
        ArrayView1::from(&self.params[s.offset..s.offset + s.len()])
    }
}

/// Mutable view of tensor `k` inside a gradient vector laid out like `net`.
pub(super) fn grad_mat<'a>(net: &NetParams, g: &'a mut [f64], k: usize) -> ArrayViewMut2<'a, f64> {
    let s = &net.layout[k];
    ArrayViewMut2::from_shape((s.rows, s.cols), &mut g[s.offset..s.offset + s.len()]).expect("layout")
}

/// Adds the column sums of `d` (`[batch × n]`) into bias tensor `k`.
pub(super) fn add_bias(net: &NetParams, g: &mut [f64], k: usize, d: &Array2<f64>) {
    let s = &net.layout[k];
    for (gi, v) in g[s.offset..s.offset + s.len()].iter_mut().zip(d.sum_axis(Axis(0))) {
        *gi += v;
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: Arch,
    dims: Dims,
    count: usize,
    tensors: Vec<TensorSpec>,
}

/// Writes `HDNN`, a little-endian `u32` header length, the JSON header and then
/// every parameter as a little-endian `f64` in layout order.
pub fn write_weights<W: Write>(net: &NetParams, mut w: W) -> Result<(), NnError> {
    net.validate()?;
    let header = Header { arch: net.arch, dims: net.dims, count: net.params.len(), tensors: net.layout.clone() };
    let json = serde_json::to_vec(&header).map_err(|e| NnError::Format(e.to_string()))?;
    w.write_all(WEIGHTS_MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(8 * net.params.len());
    for v in &net.params {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_weights<R: Read>(mut r: R) -> Result<NetParams, NnError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| NnError::Format(format!("header: {e}")))?;
    let mut net = NetParams::zeros(header.arch, header.dims);
    if header.tensors != net.layout || header.count != net.params.len() {
        return Err(NnError::Format("header layout does not match the architecture".into()));
    }
    let mut bytes = vec![0u8; 8 * header.count];
    r.read_exact(&mut bytes)?;
    for (v, chunk) in net.params.iter_mut().zip(bytes.chunks_exact(8)) {
        *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(NnError::Format(format!("{} trailing bytes", rest.len())));
    }
    net.validate()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::BASELINE_DIMS;

    #[test]
    fn parameter_counts() {
        assert_eq!(NetParams::zeros(Arch::Mlp, BASELINE_DIMS).param_count(), 48 * 64 + 64 + 64 * 12 + 12);
        assert_eq!(NetParams::zeros(Arch::Mlp, BASELINE_DIMS).param_count(), 3916);
        assert_eq!(NetParams::zeros(Arch::Lstm, BASELINE_DIMS).param_count(), 256 * 48 + 256 * 64 + 256 + 12 * 64 + 12);
        assert_eq!(NetParams::zeros(Arch::Gru, BASELINE_DIMS).param_count(), 192 * 48 + 192 * 64 + 2 * 192 + 12 * 64 + 12);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = NetParams::init(Arch::Mlp, BASELINE_DIMS, 7);
        assert_eq!(a, NetParams::init(Arch::Mlp, BASELINE_DIMS, 7));
        assert_ne!(a, NetParams::init(Arch::Mlp, BASELINE_DIMS, 8));
        let w1 = &a.layout[0];
        assert!(a.params[..w1.len()].iter().all(|v| v.abs() < 1.0 / 48f64.sqrt()));
    }

    #[test]
    fn weights_round_trip() {
        for arch in Arch::ALL {
            let net = NetParams::init(arch, BASELINE_DIMS, 3);
            let mut buf = Vec::new();
            write_weights(&net, &mut buf).unwrap();
            assert_eq!(&buf[..4], WEIGHTS_MAGIC);
            assert_eq!(read_weights(buf.as_slice()).unwrap(), net);
        }
    }

    #[test]
    fn corrupt_weights_rejected() {
        let net = NetParams::init(Arch::Gru, BASELINE_DIMS, 3);
        let mut buf = Vec::new();
        write_weights(&net, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_weights(bad.as_slice()), Err(NnError::Format(_))));
        assert!(read_weights(&buf[..buf.len() - 3]).is_err());
        buf.push(0);
        assert!(matches!(read_weights(buf.as_slice()), Err(NnError::Format(_))));
    }
}
