use super::closed_loop::LoopRun;
use super::ControlError;

/// Phase lag of `measured` behind `reference` at `ref_freq`, in degrees in `[0, 180)`.
///
/// The lag is the peak of the cross-correlation over lags of up to half a
/// period, refined by a parabola through the peak and its neighbours. The
/// correlation window spans a whole number of periods aligned to the end of
/// the signals.
pub fn phase_lag(reference: &[f64], measured: &[f64], dt: f64, ref_freq: f64) -> Result<f64, ControlError> {
    if reference.len() != measured.len() {
        return Err(ControlError::Contract("reference and measured lengths differ".into()));
    }
    if !(dt > 0.0 && ref_freq > 0.0) {
        return Err(ControlError::Contract("dt and ref_freq must be > 0".into()));
    }
    let period = (1.0 / (ref_freq * dt)).round() as usize;
    let n = reference.len();
    if period < 4 || n < 3 * period {
        return Err(ControlError::Contract(format!(
            "need at least 3 full periods ({} samples) at {ref_freq} Hz, got {n}",
            3 * period
        )));
    }
    let max_lag = period / 2 + 1;
    // window of whole periods; leaves room for one lag sample before and max_lag after
    let periods = (n - max_lag - 1) / period;
    let window = periods * period;
    let start = n - max_lag - window;

    let mean = |v: &[f64]| v[start - 1..start + window + max_lag].iter().sum::<f64>() / (window + max_lag + 1) as f64;
    let (mr, mm) = (mean(reference), mean(measured));
    let corr = |lag: isize| -> f64 {
        (start..start + window)
            .map(|t| (reference[t] - mr) * (measured[(t as isize + lag) as usize] - mm))
            .sum()
    };
    let search = (period / 2) as isize;
    let (mut best, mut best_c) = (0isize, f64::NEG_INFINITY);
    for lag in 0..search {
        let c = corr(lag);
        if c > best_c {
            best = lag;
            best_c = c;
        }
    }
    let (cm, cp) = (corr(best - 1), corr(best + 1));
    let curvature = cm - 2.0 * best_c + cp;
    let shift = if curvature < 0.0 { 0.5 * (cm - cp) / curvature } else { 0.0 };
    let lag_samples = best as f64 + shift.clamp(-0.5, 0.5);
    // rounding noise around a zero lag
    let lag_samples = if lag_samples < 1e-9 { 0.0 } else { lag_samples };
    let deg = 360.0 * lag_samples * dt * ref_freq;
    Ok(deg.rem_euclid(360.0).min(180.0 - 1e-9))
}

impl LoopRun {
    /// Phase lag of the regulated channel behind the reference.
    pub fn phase_lag(&self, ref_freq: f64) -> Result<f64, ControlError> {
        phase_lag(&self.reference(), &self.measured(), self.dt, ref_freq)
    }
}
