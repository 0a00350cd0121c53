//! 1 kHz per-joint trajectory logs and their CSV form.
//!
//! Canonical header: `t`, then for each joint `j` in `0..12` the block
//! `q_j, q_des_j, qd_j, tau_j`. Control-loop runs may append the optional
//! block `ref_0 … ref_11`. Values are written with 17 significant digits so
//! that writing and parsing are exact inverses for finite values.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::actuator::{JointSnapshot, NUM_JOINTS};

/// Log sample period (s).
pub const LOG_DT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("invalid log: {0}")]
    Invalid(String),
}

/// Whether `t1` follows `t0` by one sample period (to 1 ppm of the period).
pub fn is_step(t0: f64, t1: f64) -> bool {
    ((t1 - t0) - LOG_DT).abs() <= 1e-6 * LOG_DT
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    /// Time stamp (s).
    pub t: f64,
    pub joints: [JointSnapshot; NUM_JOINTS],
    /// Reference channel of a control-loop run, one value per joint.
    pub reference: Option<[f64; NUM_JOINTS]>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub records: Vec<LogRecord>,
}

impl TrajectoryLog {
    pub fn new(records: Vec<LogRecord>) -> Result<Self, LogError> {
        let log = Self { records };
        log.validate()?;
        Ok(log)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Indices `t` such that records `t` and `t + 1` are one sample period apart.
    pub fn step_pairs(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.windows(2).enumerate().filter(|(_, w)| is_step(w[0].t, w[1].t)).map(|(i, _)| i)
    }

    pub fn has_reference(&self) -> bool {
        self.records.first().is_some_and(|r| r.reference.is_some())
    }

    pub fn validate(&self) -> Result<(), LogError> {
        let with_ref = self.has_reference();
        for (i, r) in self.records.iter().enumerate() {
            if !r.t.is_finite() || r.joints.iter().any(|s| !s.is_finite()) {
                return Err(LogError::Invalid(format!("record {i} has non-finite values")));
            }
            if r.reference.is_some() != with_ref {
                return Err(LogError::Invalid(format!("record {i}: reference present on some records only")));
            }
            if r.reference.is_some_and(|v| v.iter().any(|x| !x.is_finite())) {
                return Err(LogError::Invalid(format!("record {i} has a non-finite reference")));
            }
            if i > 0 && r.t <= self.records[i - 1].t {
                return Err(LogError::Invalid(format!("record {i}: time stamps must strictly increase")));
            }
        }
        Ok(())
    }

    /// All snapshots of one joint in time order.
    pub fn joint(&self, j: usize) -> impl Iterator<Item = &JointSnapshot> + '_ {
        self.records.iter().map(move |r| &r.joints[j])
    }

    /// Header columns for this log.
    pub fn header(with_reference: bool) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        for j in 0..NUM_JOINTS {
            cols.extend([format!("q_{j}"), format!("q_des_{j}"), format!("qd_{j}"), format!("tau_{j}")]);
        }
        if with_reference {
            cols.extend((0..NUM_JOINTS).map(|j| format!("ref_{j}")));
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), LogError> {
        let mut wr = csv::Writer::from_writer(w);
        let with_ref = self.has_reference();
        wr.write_record(Self::header(with_ref)).map_err(csv_err)?;
        let mut fields: Vec<String> = Vec::with_capacity(1 + 5 * NUM_JOINTS);
        for r in &self.records {
            fields.clear();
            fields.push(fmt_f64(r.t));
            for s in &r.joints {
                fields.extend([fmt_f64(s.q), fmt_f64(s.q_des), fmt_f64(s.qd), fmt_f64(s.tau)]);
            }
            if let Some(reference) = &r.reference {
                fields.extend(reference.iter().map(|v| fmt_f64(*v)));
            }
            wr.write_record(&fields).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, LogError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is ascii"))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<(), LogError> {
        self.write_csv(std::io::BufWriter::new(File::create(path)?))
    }

    pub fn parse_csv<R: Read>(rd: R) -> Result<Self, LogError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(rd);
        let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
        let with_ref = check_header(&header)?;
        let width = header.len();
        let mut records = Vec::new();
        let mut prev_t = f64::NEG_INFINITY;
        for row in reader.records() {
            let row = row.map_err(csv_err)?;
            let line = row.position().map_or(0, |p| p.line());
            if row.len() != width {
                return Err(LogError::Parse { line, msg: format!("expected {width} fields, found {}", row.len()) });
            }
            let mut vals = Vec::with_capacity(width);
            for (col, field) in header.iter().zip(row.iter()) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| LogError::Parse { line, msg: format!("malformed number {field:?} in column {col}") })?;
                if !v.is_finite() {
                    return Err(LogError::Parse { line, msg: format!("non-finite value {field:?} in column {col}") });
                }
                vals.push(v);
            }
            let t = vals[0];
            if t <= prev_t {
                return Err(LogError::Parse { line, msg: format!("time stamp {t} does not increase") });
            }
            prev_t = t;
            let mut joints = [JointSnapshot::default(); NUM_JOINTS];
            for (j, s) in joints.iter_mut().enumerate() {
                let b = 1 + 4 * j;
                *s = JointSnapshot::new(vals[b], vals[b + 1], vals[b + 2], vals[b + 3]);
            }
            let reference = with_ref.then(|| {
                let mut r = [0.0; NUM_JOINTS];
                r.copy_from_slice(&vals[1 + 4 * NUM_JOINTS..]);
                r
            });
            records.push(LogRecord { t, joints, reference });
        }
        Ok(Self { records })
    }

    pub fn from_csv_str(text: &str) -> Result<Self, LogError> {
        Self::parse_csv(text.as_bytes())
    }
}

/// Reads and validates a trajectory CSV file.
pub fn parse_trajectory_csv(path: &Path) -> Result<TrajectoryLog, LogError> {
    let file = File::open(path)?;
    TrajectoryLog::parse_csv(std::io::BufReader::new(file))
}

fn check_header(header: &[String]) -> Result<bool, LogError> {
    let base = TrajectoryLog::header(false);
    let full = TrajectoryLog::header(true);
    if header == base.as_slice() {
        return Ok(false);
    }
    if header == full.as_slice() {
        return Ok(true);
    }
    let missing: Vec<&str> = base.iter().filter(|c| !header.contains(c)).map(String::as_str).collect();
    let extra: Vec<&str> = header.iter().filter(|c| !full.contains(c)).map(String::as_str).collect();
    let msg = if !missing.is_empty() || !extra.is_empty() {
        let mut parts = Vec::new();
        if !missing.is_empty() {
            parts.push(format!("missing columns: {}", missing.join(", ")));
        }
        if !extra.is_empty() {
            parts.push(format!("unexpected columns: {}", extra.join(", ")));
        }
        parts.join("; ")
    } else {
        let first_bad = header
            .iter()
            .zip(full.iter())
            .find(|(a, b)| a != b)
            .map(|(a, b)| format!("found {a:?} where {b:?} was expected"))
            .unwrap_or_else(|| "incomplete reference block".into());
        format!("columns out of canonical order: {first_bad}")
    };
    Err(LogError::Schema(msg))
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> LogError {
    let line = e.position().map_or(0, |p| p.line());
    LogError::Parse { line, msg: e.to_string() }
}
