//! Per-iteration trace rows and their CSV encoding.
//!
//! Single-loop traces use the header `iter,sigma,f_est,f_best,success,calls,grad_norm`.
//! Nested min-max and GDA traces prepend the outer index and a phase label:
//! `t,phase,k,sigma,f_est,f_best,success,calls,grad_norm`. A missing gradient
//! norm is written as an empty field.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(rename = "iter")]
    pub iteration: u64,
    /// Step size used by this iteration.
    pub sigma: f64,
    /// Estimate at the incumbent.
    #[serde(rename = "f_est")]
    pub f_estimate_current: f64,
    /// Estimate at the selected offspring.
    #[serde(rename = "f_best")]
    pub f_estimate_best_offspring: f64,
    pub success: bool,
    /// Cumulative oracle calls after this iteration.
    #[serde(rename = "calls")]
    pub oracle_calls: u64,
    /// Gradient norm at the incumbent, recorded only in validation runs.
    pub grad_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Max,
    Min,
    Gda,
}

/// A trace row tagged with its outer iteration and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasedRecord {
    pub t: u64,
    pub phase: Phase,
    pub record: TraceRecord,
}

#[derive(Serialize)]
struct PhasedRow {
    t: u64,
    phase: Phase,
    k: u64,
    sigma: f64,
    f_est: f64,
    f_best: f64,
    success: bool,
    calls: u64,
    grad_norm: Option<f64>,
}

impl From<&PhasedRecord> for PhasedRow {
    fn from(p: &PhasedRecord) -> Self {
        let r = &p.record;
        PhasedRow {
            t: p.t,
            phase: p.phase,
            k: r.iteration,
            sigma: r.sigma,
            f_est: r.f_estimate_current,
            f_best: r.f_estimate_best_offspring,
            success: r.success,
            calls: r.oracle_calls,
            grad_norm: r.grad_norm,
        }
    }
}

pub const TRACE_HEADER: &str = "iter,sigma,f_est,f_best,success,calls,grad_norm";
pub const PHASED_TRACE_HEADER: &str = "t,phase,k,sigma,f_est,f_best,success,calls,grad_norm";

fn write_header_only<W: Write>(mut out: W, header: &str) -> Result<()> {
    writeln!(out, "{header}")?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(out: W, records: &[TraceRecord]) -> Result<()> {
    if records.is_empty() {
        return write_header_only(out, TRACE_HEADER);
    }
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_phased_trace_csv<W: Write>(out: W, records: &[PhasedRecord]) -> Result<()> {
    if records.is_empty() {
        return write_header_only(out, PHASED_TRACE_HEADER);
    }
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(PhasedRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_to_csv_string(records: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn phased_trace_to_csv_string(records: &[PhasedRecord]) -> String {
    let mut buf = Vec::new();
    write_phased_trace_csv(&mut buf, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn read_trace_csv<R: std::io::Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: u64, g: Option<f64>) -> TraceRecord {
        TraceRecord {
            iteration: i,
            sigma: 0.5,
            f_estimate_current: 1.0,
            f_estimate_best_offspring: 0.25,
            success: true,
            oracle_calls: 3 * (i + 1),
            grad_norm: g,
        }
    }

    #[test]
    fn header_and_empty_grad_norm() {
        let s = trace_to_csv_string(&[row(0, None), row(1, Some(2.0))]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines[1], "0,0.5,1.0,0.25,true,3,");
        assert_eq!(lines[2], "1,0.5,1.0,0.25,true,6,2.0");
    }

    #[test]
    fn empty_trace_still_has_header() {
        assert_eq!(trace_to_csv_string(&[]).trim_end(), TRACE_HEADER);
        assert_eq!(phased_trace_to_csv_string(&[]).trim_end(), PHASED_TRACE_HEADER);
    }

    #[test]
    fn phased_header() {
        let s = phased_trace_to_csv_string(&[PhasedRecord {
            t: 2,
            phase: Phase::Max,
            record: row(4, None),
        }]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], PHASED_TRACE_HEADER);
        assert_eq!(lines[1], "2,max,4,0.5,1.0,0.25,true,15,");
    }

    #[test]
    fn round_trip() {
        let rows = vec![row(0, None), row(1, Some(1e-7))];
        let back = read_trace_csv(trace_to_csv_string(&rows).as_bytes()).unwrap();
        assert_eq!(back, rows);
    }
}
