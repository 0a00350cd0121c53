use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2};

use super::params::{add_bias, grad_mat, NetParams};
use super::train::SeqBatch;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub(super) struct Step {
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
    pub c: Array2<f64>,
    pub h: Array2<f64>,
    pub y: Array2<f64>,
}

pub(super) fn step(net: &NetParams, x: ArrayView2<'_, f64>, h: ArrayView2<'_, f64>, c: ArrayView2<'_, f64>) -> Step {
    let hd = net.dims.hidden;
    let mut z = x.dot(&net.mat(0).t());
    general_mat_mul(1.0, &h, &net.mat(1).t(), 1.0, &mut z);
    z += &net.vec(2);
    let gate = |k: usize, act: fn(f64) -> f64| z.slice(s![.., k * hd..(k + 1) * hd]).mapv(act);
    let (i, f, g, o) = (gate(0, sigmoid), gate(1, sigmoid), gate(2, f64::tanh), gate(3, sigmoid));
    let c = &f * &c + &i * &g;
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;
    let mut y = h.dot(&net.mat(3).t());
    y += &net.vec(4);
    Step { i, f, g, o, tanh_c, c, h, y }
}

pub(super) fn loss(net: &NetParams, batch: &SeqBatch) -> f64 {
    let shape = (batch.streams(), net.dims.hidden);
    let (mut h, mut c) = (Array2::zeros(shape), Array2::zeros(shape));
    let mut sum = 0.0;
    for (x, t) in batch.xs.iter().zip(&batch.ts) {
        let st = step(net, x.view(), h.view(), c.view());
        sum += (&st.y - t).iter().map(|v| v * v).sum::<f64>();
        (h, c) = (st.h, st.c);
    }
    sum / batch.elements() as f64
}

/// Backpropagation through time over the whole batch sequence.
pub(super) fn loss_and_grad(net: &NetParams, batch: &SeqBatch) -> (f64, Vec<f64>) {
    let hd = net.dims.hidden;
    let shape = (batch.streams(), hd);
    let m = batch.elements() as f64;
    let mut hs = vec![Array2::zeros(shape)];
    let mut cs = vec![Array2::zeros(shape)];
    let mut steps = Vec::with_capacity(batch.xs.len());
    let mut dys = Vec::with_capacity(batch.xs.len());
    let mut loss = 0.0;
    for (k, (x, t)) in batch.xs.iter().zip(&batch.ts).enumerate() {
        let st = step(net, x.view(), hs[k].view(), cs[k].view());
        let diff = &st.y - t;
        loss += diff.iter().map(|v| v * v).sum::<f64>();
        dys.push(diff * (2.0 / m));
        hs.push(st.h.clone());
        cs.push(st.c.clone());
        steps.push(st);
    }

    let mut g = vec![0.0; net.param_count()];
    let (w_hh, w_out) = (net.mat(1), net.mat(3));
    let mut dh_next = Array2::<f64>::zeros(shape);
    let mut dc_next = Array2::<f64>::zeros(shape);
    let mut dz = Array2::<f64>::zeros((shape.0, 4 * hd));
    for k in (0..steps.len()).rev() {
        let st = &steps[k];
        let dy = &dys[k];
        general_mat_mul(1.0, &dy.t(), &st.h, 1.0, &mut grad_mat(net, &mut g, 3));
        add_bias(net, &mut g, 4, dy);
        let dh = dy.dot(&w_out) + &dh_next;
        let dc = &dh * &st.o * &st.tanh_c.mapv(|v| 1.0 - v * v) + &dc_next;
        let d_o = &dh * &st.tanh_c;
        let d_i = &dc * &st.g;
        let d_g = &dc * &st.i;
        let d_f = &dc * &cs[k];
        dc_next = &dc * &st.f;
        dz.slice_mut(s![.., 0..hd]).assign(&(d_i * &st.i.mapv(|v| v * (1.0 - v))));
        dz.slice_mut(s![.., hd..2 * hd]).assign(&(d_f * &st.f.mapv(|v| v * (1.0 - v))));
        dz.slice_mut(s![.., 2 * hd..3 * hd]).assign(&(d_g * &st.g.mapv(|v| 1.0 - v * v)));
        dz.slice_mut(s![.., 3 * hd..4 * hd]).assign(&(d_o * &st.o.mapv(|v| v * (1.0 - v))));
        general_mat_mul(1.0, &dz.t(), &batch.xs[k], 1.0, &mut grad_mat(net, &mut g, 0));
        general_mat_mul(1.0, &dz.t(), &hs[k], 1.0, &mut grad_mat(net, &mut g, 1));
        add_bias(net, &mut g, 2, &dz);
        dh_next = dz.dot(&w_hh);
    }
    (loss / m, g)
}
