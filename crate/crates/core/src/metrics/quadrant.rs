use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::log::TrajectoryLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2d {
    /// `bins_x + 1` edges on `q_des − q` (rad).
    pub x_edges: Vec<f64>,
    /// `bins_y + 1` edges on `τ` (N·m).
    pub y_edges: Vec<f64>,
    /// `counts[ix][iy]`.
    pub counts: Vec<Vec<u64>>,
}

impl Histogram2d {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// One row per bin: `bin_x,bin_y,x_lo,x_hi,y_lo,y_hi,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), MetricsError> {
        writeln!(w, "bin_x,bin_y,x_lo,x_hi,y_lo,y_hi,count")?;
        for (ix, col) in self.counts.iter().enumerate() {
            for (iy, c) in col.iter().enumerate() {
                writeln!(
                    w,
                    "{ix},{iy},{:e},{:e},{:e},{:e},{c}",
                    self.x_edges[ix],
                    self.x_edges[ix + 1],
                    self.y_edges[iy],
                    self.y_edges[iy + 1]
                )?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantStats {
    /// Share of samples with `τ·(q_des − q) < 0`.
    pub opposite_fraction: f64,
    pub n_total: usize,
    pub histogram: Histogram2d,
}

/// Symmetric range padded 5% past the largest magnitude.
fn symmetric_edges(values: impl Iterator<Item = f64>, bins: usize) -> Vec<f64> {
    let peak = values.fold(0.0f64, |m, v| m.max(v.abs()));
    let half = if peak > 0.0 { 1.05 * peak } else { 1.0 };
    (0..=bins).map(|i| -half + 2.0 * half * i as f64 / bins as f64).collect()
}

fn bin_of(v: f64, edges: &[f64]) -> usize {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    (((v - lo) / (hi - lo) * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Opposite-direction share and 2-D histogram of `(q_des − q, τ)` over every joint sample.
pub fn quadrant_stats(log: &TrajectoryLog, bins_x: usize, bins_y: usize) -> Result<QuadrantStats, MetricsError> {
    if log.is_empty() {
        return Err(MetricsError::Contract("empty log".into()));
    }
    if bins_x == 0 || bins_y == 0 {
        return Err(MetricsError::Contract("histogram needs at least one bin per axis".into()));
    }
    let samples = || log.records.iter().flat_map(|r| r.joints.iter().map(|s| (s.q_des - s.q, s.tau)));
    let x_edges = symmetric_edges(samples().map(|(x, _)| x), bins_x);
    let y_edges = symmetric_edges(samples().map(|(_, y)| y), bins_y);
    let mut counts = vec![vec![0u64; bins_y]; bins_x];
    let (mut opposite, mut n) = (0usize, 0usize);
    for (x, y) in samples() {
        counts[bin_of(x, &x_edges)][bin_of(y, &y_edges)] += 1;
        if x * y < 0.0 {
            opposite += 1;
        }
        n += 1;
    }
    Ok(QuadrantStats {
        opposite_fraction: opposite as f64 / n as f64,
        n_total: n,
        histogram: Histogram2d { x_edges, y_edges, counts },
    })
}
