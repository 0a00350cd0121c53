use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::actuator::{predict_batch12, ActuatorCoeffs, JointSnapshot, NUM_JOINTS};

/// Distinct input sets cycled through during a run.
const POOL: usize = 4096;
/// Calls per sample when the clock is too coarse for per-call timing.
const BATCH: usize = 1000;
/// Coarsest clock resolution accepted for per-call timing.
const FINE_CLOCK: Duration = Duration::from_nanos(100);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    PerCall,
    /// Each sample is the mean over a block of consecutive calls.
    Batched { calls: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub median_ns: f64,
    pub p99_ns: f64,
    pub min_ns: f64,
    pub iterations: usize,
    /// Sum of every predicted torque, in call order.
    pub checksum: f64,
    pub mode: TimingMode,
    /// Smallest non-zero clock step observed (ns).
    pub clock_resolution_ns: f64,
    pub pinned_cpu: Option<usize>,
    pub warnings: Vec<String>,
}

fn snapshot_pool(seed: u64) -> Vec<[JointSnapshot; NUM_JOINTS]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..POOL)
        .map(|_| {
            std::array::from_fn(|_| {
                let q = rng.random_range(-1.0..1.0);
                JointSnapshot::new(
                    q,
                    q + rng.random_range(-0.05..0.05),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-600.0..600.0),
                )
            })
        })
        .collect()
}

fn check_inputs(coeffs: &[ActuatorCoeffs], n_iters: usize) -> Result<(), MetricsError> {
    if coeffs.len() != NUM_JOINTS {
        return Err(MetricsError::Contract(format!("expected {NUM_JOINTS} coefficient sets, got {}", coeffs.len())));
    }
    if n_iters == 0 {
        return Err(MetricsError::Contract("n_iters must be >= 1".into()));
    }
    for c in coeffs {
        c.validate().map_err(|e| MetricsError::Contract(e.to_string()))?;
    }
    Ok(())
}

/// Checksum of `n_iters` untimed calls over the same inputs as [`bench_latency`].
pub fn replay_checksum(coeffs: &[ActuatorCoeffs], n_iters: usize, seed: u64) -> Result<f64, MetricsError> {
    check_inputs(coeffs, n_iters)?;
    let pool = snapshot_pool(seed);
    let mut sum = 0.0;
    for k in 0..n_iters {
        let out = predict_batch12(coeffs, &pool[k % POOL]).map_err(|e| MetricsError::Contract(e.to_string()))?;
        sum += out.iter().sum::<f64>();
    }
    Ok(sum)
}

fn clock_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..1000 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

#[cfg(target_os = "linux")]
fn pin_current_thread() -> Option<usize> {
    // SAFETY: plain libc calls on a zeroed cpu_set_t owned by this frame.
    unsafe {
        let cpu = libc::sched_getcpu();
        if cpu < 0 {
            return None;
        }
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu as usize, &mut set);
        (libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0).then_some(cpu as usize)
    }
}

#[cfg(not(target_os = "linux"))]
fn pin_current_thread() -> Option<usize> {
    None
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Times `predict_batch12` over `n_iters` calls on a dedicated thread pinned
/// to one CPU. Inputs are generated before timing starts.
pub fn bench_latency(coeffs: &[ActuatorCoeffs], n_iters: usize, seed: u64) -> Result<LatencyStats, MetricsError> {
    check_inputs(coeffs, n_iters)?;
    let coeffs: Vec<ActuatorCoeffs> = coeffs.to_vec();
    std::thread::spawn(move || run_pinned(&coeffs, n_iters, seed))
        .join()
        .map_err(|_| MetricsError::Contract("benchmark thread panicked".into()))?
}

fn run_pinned(coeffs: &[ActuatorCoeffs], n_iters: usize, seed: u64) -> Result<LatencyStats, MetricsError> {
    let pinned_cpu = pin_current_thread();
    let mut warnings = Vec::new();
    if pinned_cpu.is_none() {
        warnings.push("could not pin the benchmark thread".to_string());
    }
    let pool = snapshot_pool(seed);
    let call = |k: usize| predict_batch12(coeffs, black_box(&pool[k % POOL])).expect("validated inputs");

    // warm-up, not part of the checksum
    for k in 0..POOL.min(n_iters) {
        black_box(call(k));
    }

    let resolution = clock_resolution();
    let mut mode = if resolution > FINE_CLOCK {
        warnings.push(format!("clock resolution {resolution:?} is coarser than {FINE_CLOCK:?}; using batched timing"));
        TimingMode::Batched { calls: BATCH }
    } else {
        TimingMode::PerCall
    };

    loop {
        let mut checksum = 0.0;
        let mut samples = Vec::with_capacity(n_iters);
        match mode {
            TimingMode::PerCall => {
                for k in 0..n_iters {
                    let t0 = Instant::now();
                    let out = call(k);
                    let dt = t0.elapsed();
                    checksum += black_box(out).iter().sum::<f64>();
                    samples.push(dt.as_nanos() as f64);
                }
            }
            TimingMode::Batched { calls } => {
                let mut k = 0;
                while k < n_iters {
                    let block = calls.min(n_iters - k);
                    let mut outs = [[0.0; NUM_JOINTS]; BATCH];
                    let t0 = Instant::now();
                    for (i, slot) in outs.iter_mut().take(block).enumerate() {
                        *slot = call(k + i);
                    }
                    let dt = t0.elapsed();
                    for o in black_box(&outs).iter().take(block) {
                        checksum += o.iter().sum::<f64>();
                    }
                    samples.push(dt.as_nanos() as f64 / block as f64);
                    k += block;
                }
            }
        }
        samples.sort_by(f64::total_cmp);
        if samples[0] <= 0.0 {
            if matches!(mode, TimingMode::PerCall) {
                warnings.push("a per-call sample read 0 ns; repeating with batched timing".to_string());
                mode = TimingMode::Batched { calls: BATCH };
                continue;
            }
            return Err(MetricsError::Contract("timer reported zero elapsed time for a whole batch".into()));
        }
        return Ok(LatencyStats {
            median_ns: percentile(&samples, 0.5),
            p99_ns: percentile(&samples, 0.99),
            min_ns: samples[0],
            iterations: n_iters,
            checksum,
            mode,
            clock_resolution_ns: resolution.as_nanos() as f64,
            pinned_cpu,
            warnings,
        });
    }
}
