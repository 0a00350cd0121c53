use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};

use super::params::{add_bias, grad_mat, NetParams};
use super::train::SeqBatch;

/// Hidden activations and outputs for a batch of frames.
pub(super) fn forward(net: &NetParams, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
    let mut a = x.dot(&net.mat(0).t());
    a += &net.vec(1);
    a.mapv_inplace(f64::tanh);
    let mut y = a.dot(&net.mat(2).t());
    y += &net.vec(3);
    (a, y)
}

pub(super) fn loss(net: &NetParams, batch: &SeqBatch) -> f64 {
    let sum: f64 = batch
        .xs
        .iter()
        .zip(&batch.ts)
        .map(|(x, t)| {
            let (_, y) = forward(net, x.view());
            (&y - t).iter().map(|v| v * v).sum::<f64>()
        })
        .sum();
    sum / batch.elements() as f64
}

pub(super) fn loss_and_grad(net: &NetParams, batch: &SeqBatch) -> (f64, Vec<f64>) {
    let m = batch.elements() as f64;
    let mut g = vec![0.0; net.param_count()];
    let mut loss = 0.0;
    let w2 = net.mat(2);
    for (x, t) in batch.xs.iter().zip(&batch.ts) {
        let (a, y) = forward(net, x.view());
        let diff = &y - t;
        loss += diff.iter().map(|v| v * v).sum::<f64>();
        let dy = diff * (2.0 / m);
        general_mat_mul(1.0, &dy.t(), &a, 1.0, &mut grad_mat(net, &mut g, 2));
        add_bias(net, &mut g, 3, &dy);
        let mut dz = dy.dot(&w2);
        dz.zip_mut_with(&a, |d, &av| *d *= 1.0 - av * av);
        general_mat_mul(1.0, &dz.t(), x, 1.0, &mut grad_mat(net, &mut g, 0));
        add_bias(net, &mut g, 1, &dz);
    }
    (loss / m, g)
}
