use std::io::Write;

use serde::{Deserialize, Serialize};

use super::VariantConfig;
use crate::error::{Error, Result};
use crate::runtime::RunningStats;

/// Column header shared by trace and bound-series exports.
pub const TRACE_HEADER: [&str; 7] =
    ["iteration", "wallclock", "loss", "eta", "grad_norm", "max_staleness", "mean_staleness"];

/// Minimum number of post-burn-in records for a runtime measurement.
pub const MIN_RUNTIME_RECORDS: usize = 100;

/// One parameter-server update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Number of updates applied so far, counting this one (1-based).
    pub iteration: usize,
    pub wallclock: f64,
    /// `F(w)` right after this update.
    pub loss: f64,
    /// `j - τ` for each gradient folded into this update, `j` being the
    /// 0-based index of the iterate the update was applied to.
    pub staleness: Vec<usize>,
    pub eta: f64,
    /// `||∇F(w)||` right after this update.
    pub grad_norm: f64,
}

impl TraceRecord {
    pub fn max_staleness(&self) -> usize {
        self.staleness.iter().copied().max().unwrap_or(0)
    }

    pub fn mean_staleness(&self) -> f64 {
        if self.staleness.is_empty() {
            0.0
        } else {
            self.staleness.iter().sum::<usize>() as f64 / self.staleness.len() as f64
        }
    }
}

/// Result of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub config: VariantConfig,
    pub master_seed: u64,
    pub replication: u64,
    /// `F(w_0)`.
    pub initial_loss: f64,
    pub records: Vec<TraceRecord>,
    pub final_params: Vec<f64>,
    /// `w_0, w_1, …` when the run was configured to keep them.
    pub snapshots: Option<Vec<Vec<f64>>>,
    /// Iteration at which the loss exceeded the divergence threshold or
    /// stopped being finite. The offending record is the last one kept.
    pub diverged_at: Option<usize>,
}

/// Mean and standard error of the time between consecutive updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeMeasurement {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn total_wallclock(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.wallclock)
    }

    /// `F(w_0), F(w_1), …, F(w_n)`.
    pub fn losses(&self) -> Vec<f64> {
        std::iter::once(self.initial_loss).chain(self.records.iter().map(|r| r.loss)).collect()
    }

    /// Wallclock increments; the first is measured from time zero.
    pub fn iteration_durations(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.records
            .iter()
            .map(|r| {
                let d = r.wallclock - prev;
                prev = r.wallclock;
                d
            })
            .collect()
    }

    /// Mean time per update after discarding the first `burn_in` records.
    pub fn measure_runtime_per_iteration(&self, burn_in: usize) -> Result<RuntimeMeasurement> {
        let durations = self.iteration_durations();
        let got = durations.len().saturating_sub(burn_in);
        if got < MIN_RUNTIME_RECORDS {
            return Err(Error::InsufficientData { needed: MIN_RUNTIME_RECORDS, got });
        }
        let stats: RunningStats = durations[burn_in..].iter().copied().collect();
        Ok(RuntimeMeasurement { mean: stats.mean(), stderr: stats.stderr(), count: got })
    }

    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.records.iter().map(CsvRow::from).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, "loss", &self.csv_rows())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

/// One row of the trace CSV schema.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub iteration: usize,
    pub wallclock: f64,
    pub value: f64,
    pub eta: f64,
    pub grad_norm: f64,
    pub max_staleness: f64,
    pub mean_staleness: f64,
}

impl From<&TraceRecord> for CsvRow {
    fn from(r: &TraceRecord) -> Self {
        CsvRow {
            iteration: r.iteration,
            wallclock: r.wallclock,
            value: r.loss,
            eta: r.eta,
            grad_norm: r.grad_norm,
            max_staleness: r.max_staleness() as f64,
            mean_staleness: r.mean_staleness(),
        }
    }
}

/// Writes rows under the trace header, with the third column named
/// `value_column` (`loss` for traces, `bound` for bound series). Floats use
/// the shortest representation that round-trips.
pub fn write_rows<W: Write>(out: W, value_column: &str, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = TRACE_HEADER;
    header[2] = value_column;
    w.write_record(header)?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.wallclock.to_string(),
            r.value.to_string(),
            r.eta.to_string(),
            r.grad_norm.to_string(),
            r.max_staleness.to_string(),
            r.mean_staleness.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Parses a trace or bound-series CSV back into rows.
pub fn read_rows(text: &str) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() != TRACE_HEADER.len()
        || headers.iter().zip(TRACE_HEADER).enumerate().any(|(i, (h, e))| i != 2 && h != e)
    {
        return Err(Error::Parse { path: "<csv>".into(), message: format!("unexpected header {headers:?}") });
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| Error::Parse { path: "<csv>".into(), message: format!("{s:?}: {e}") })
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(CsvRow {
            iteration: rec[0]
                .parse()
                .map_err(|e| Error::Parse { path: "<csv>".into(), message: format!("iteration: {e}") })?,
            wallclock: parse(&rec[1])?,
            value: parse(&rec[2])?,
            eta: parse(&rec[3])?,
            grad_norm: parse(&rec[4])?,
            max_staleness: parse(&rec[5])?,
            mean_staleness: parse(&rec[6])?,
        });
    }
    Ok(rows)
}
