use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2};

use super::params::{add_bias, grad_mat, NetParams};
use super::train::SeqBatch;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub(super) struct Step {
    r: Array2<f64>,
    z: Array2<f64>,
    n: Array2<f64>,
    /// `W_hn·h + b_hn`, the recurrent part of the candidate before the reset gate.
    gh_n: Array2<f64>,
    pub h: Array2<f64>,
    pub y: Array2<f64>,
}

/// r = σ(W_ir x + b_ir + W_hr h + b_hr), z likewise,
/// n = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn)), h' = (1 − z) ⊙ n + z ⊙ h.
pub(super) fn step(net: &NetParams, x: ArrayView2<'_, f64>, h: ArrayView2<'_, f64>) -> Step {
    let hd = net.dims.hidden;
    let mut gi = x.dot(&net.mat(0).t());
    gi += &net.vec(2);
    let mut gh = h.dot(&net.mat(1).t());
    gh += &net.vec(3);
    let block = |a: &Array2<f64>, k: usize| a.slice(s![.., k * hd..(k + 1) * hd]).to_owned();
    let r = (block(&gi, 0) + block(&gh, 0)).mapv(sigmoid);
    let z = (block(&gi, 1) + block(&gh, 1)).mapv(sigmoid);
    let gh_n = block(&gh, 2);
    let n = (block(&gi, 2) + &r * &gh_n).mapv(f64::tanh);
    let h = z.mapv(|v| 1.0 - v) * &n + &z * &h;
    let mut y = h.dot(&net.mat(4).t());
    y += &net.vec(5);
    Step { r, z, n, gh_n, h, y }
}

pub(super) fn loss(net: &NetParams, batch: &SeqBatch) -> f64 {
    let mut h = Array2::zeros((batch.streams(), net.dims.hidden));
    let mut sum = 0.0;
    for (x, t) in batch.xs.iter().zip(&batch.ts) {
        let st = step(net, x.view(), h.view());
        sum += (&st.y - t).iter().map(|v| v * v).sum::<f64>();
        h = st.h;
    }
    sum / batch.elements() as f64
}

pub(super) fn loss_and_grad(net: &NetParams, batch: &SeqBatch) -> (f64, Vec<f64>) {
    let hd = net.dims.hidden;
    let shape = (batch.streams(), hd);
    let m = batch.elements() as f64;
    let mut hs = vec![Array2::zeros(shape)];
    let mut steps = Vec::with_capacity(batch.xs.len());
    let mut dys = Vec::with_capacity(batch.xs.len());
    let mut loss = 0.0;
    for (k, (x, t)) in batch.xs.iter().zip(&batch.ts).enumerate() {
        let st = step(net, x.view(), hs[k].view());
        let diff = &st.y - t;
        loss += diff.iter().map(|v| v * v).sum::<f64>();
        dys.push(diff * (2.0 / m));
        hs.push(st.h.clone());
        steps.push(st);
    }

    let mut g = vec![0.0; net.param_count()];
    let (w_hh, w_out) = (net.mat(1), net.mat(4));
    let mut dh_next = Array2::<f64>::zeros(shape);
    let mut dgi = Array2::<f64>::zeros((shape.0, 3 * hd));
    let mut dgh = Array2::<f64>::zeros((shape.0, 3 * hd));
    for k in (0..steps.len()).rev() {
        let st = &steps[k];
        let dy = &dys[k];
        general_mat_mul(1.0, &dy.t(), &st.h, 1.0, &mut grad_mat(net, &mut g, 4));
        add_bias(net, &mut g, 5, dy);
        let dh = dy.dot(&w_out) + &dh_next;
        let dn = &dh * &st.z.mapv(|v| 1.0 - v);
        let dzg = &dh * &(&hs[k] - &st.n);
        let da_n = dn * &st.n.mapv(|v| 1.0 - v * v);
        let da_r = &da_n * &st.gh_n * &st.r.mapv(|v| v * (1.0 - v));
        let da_z = dzg * &st.z.mapv(|v| v * (1.0 - v));
        for (k, part) in [&da_r, &da_z, &da_n].into_iter().enumerate() {
            dgi.slice_mut(s![.., k * hd..(k + 1) * hd]).assign(part);
        }
        dgh.slice_mut(s![.., 0..2 * hd]).assign(&dgi.slice(s![.., 0..2 * hd]));
        dgh.slice_mut(s![.., 2 * hd..3 * hd]).assign(&(&da_n * &st.r));
        general_mat_mul(1.0, &dgi.t(), &batch.xs[k], 1.0, &mut grad_mat(net, &mut g, 0));
        general_mat_mul(1.0, &dgh.t(), &hs[k], 1.0, &mut grad_mat(net, &mut g, 1));
        add_bias(net, &mut g, 2, &dgi);
        add_bias(net, &mut g, 3, &dgh);
        dh_next = &dh * &st.z + dgh.dot(&w_hh);
    }
    (loss / m, g)
}
