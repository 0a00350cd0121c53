use hydrodyn::nn::{gradient_check, Arch, NetParams, SeqBatch, BASELINE_DIMS};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random inputs and targets, `steps` frames of `streams` sequences each.
pub fn random_batch(steps: usize, streams: usize, seed: u64) -> SeqBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r, c| Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0));
    let xs = (0..steps).map(|_| draw(streams, BASELINE_DIMS.input)).collect();
    let ts = (0..steps).map(|_| draw(streams, BASELINE_DIMS.output)).collect();
    SeqBatch { xs, ts }
}

fn check(arch: Arch, steps: usize) -> f64 {
    let net = NetParams::init(arch, BASELINE_DIMS, 21);
    gradient_check(&net, &random_batch(steps, 2, 22), 1e-5).unwrap()
}

#[test]
fn mlp_backprop_matches_finite_differences() {
    let err = check(Arch::Mlp, 1);
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn lstm_bptt_matches_finite_differences() {
    let err = check(Arch::Lstm, 5);
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn gru_bptt_matches_finite_differences() {
    let err = check(Arch::Gru, 5);
    assert!(err < 1e-4, "{err:e}");
}
