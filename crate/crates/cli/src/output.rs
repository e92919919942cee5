//! CSV and JSON emitters plus run metadata.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use fcms_core::ews::EwsRecord;
use fcms_core::experiments::{HistoryRecord, PhaseVector, ProbeSample, ScaleRecord, SweepRecord};
use fcms_core::spectral::Eigenvalue;
use fcms_core::StepRecord;
use serde::Serialize;
use serde_json::Value;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Missing,
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Missing => String::new(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

/// 17 significant digits, so every `f64` parses back to the same bits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// A record type with a fixed column schema.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn cells(&self) -> Vec<Cell>;
}

/// Writes a header row, then one row per record, to `path`.
pub fn emit_csv<R: CsvRow>(records: &[R], path: &Path) -> io::Result<()> {
    fs::write(path, render_csv(records)?)
}

pub fn render_csv<R: CsvRow>(records: &[R]) -> io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(R::HEADER)?;
    for r in records {
        let cells = r.cells();
        debug_assert_eq!(cells.len(), R::HEADER.len());
        w.write_record(cells.iter().map(Cell::render))?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

/// Pretty JSON with sorted keys: `{"metadata": ..., "report": ...}`.
pub fn emit_json<T: Serialize>(report: &T, metadata: &RunMetadata, path: &Path) -> io::Result<()> {
    fs::write(path, render_json(report, metadata)?)
}

pub fn render_json<T: Serialize>(report: &T, metadata: &RunMetadata) -> io::Result<Vec<u8>> {
    let doc = serde_json::json!({
        "metadata": to_value(metadata)?,
        "report": to_value(report)?,
    });
    let mut out = serde_json::to_vec_pretty(&doc).map_err(io::Error::other)?;
    out.push(b'\n');
    Ok(out)
}

fn to_value<T: Serialize>(v: &T) -> io::Result<Value> {
    serde_json::to_value(v).map_err(io::Error::other)
}

/// Everything needed to rerun and audit a data file. Wall-clock time only
/// goes to the sidecar file so that data files stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub prng: &'static str,
    pub diverged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
    pub files: Vec<String>,
    pub summary: Value,
}

/// Writes `<stem>.meta.json`: the metadata plus wall-clock seconds.
pub fn emit_sidecar(
    metadata: &RunMetadata,
    wall_clock_seconds: f64,
    path: &Path,
) -> io::Result<()> {
    let mut v = to_value(metadata)?;
    if let Value::Object(m) = &mut v {
        m.insert("wall_clock_seconds".into(), Value::from(wall_clock_seconds));
    }
    let mut out = serde_json::to_vec_pretty(&v).map_err(io::Error::other)?;
    out.push(b'\n');
    fs::write(path, out)
}

impl CsvRow for StepRecord {
    const HEADER: &'static [&'static str] = &["t", "S", "d", "G1", "G2", "L_global"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Int(self.t as u64),
            Cell::Float(self.s),
            Cell::Float(self.d),
            Cell::Float(self.g1),
            Cell::Float(self.g2),
            Cell::Float(self.l_global),
        ]
    }
}

impl CsvRow for EwsRecord {
    const HEADER: &'static [&'static str] =
        &["beta", "variance", "lag1_ac", "tau_theory", "tau_measured"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Float(self.beta),
            Cell::Float(self.variance),
            Cell::Float(self.lag1_ac),
            self.tau_theory.into(),
            self.tau_measured.into(),
        ]
    }
}

impl CsvRow for SweepRecord {
    const HEADER: &'static [&'static str] = &[
        "beta",
        "regime",
        "rho",
        "final_abs_d",
        "diverged_at",
        "converged",
        "tau_theory",
    ];
    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Float(self.beta),
            Cell::Text(self.regime.as_str().into()),
            Cell::Float(self.rho),
            self.final_abs_d.into(),
            self.diverged_at
                .map_or(Cell::Missing, |t| Cell::Int(t as u64)),
            Cell::Text(self.converged.to_string()),
            self.tau_theory.into(),
        ]
    }
}

impl CsvRow for Eigenvalue {
    const HEADER: &'static [&'static str] = &["re", "im", "modulus", "phase"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Float(self.re),
            Cell::Float(self.im),
            Cell::Float(self.modulus),
            Cell::Float(self.phase),
        ]
    }
}

impl CsvRow for PhaseVector {
    const HEADER: &'static [&'static str] = &["S", "d", "dS", "dd"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Float(self.s),
            Cell::Float(self.d),
            Cell::Float(self.ds),
            Cell::Float(self.dd),
        ]
    }
}

impl CsvRow for ProbeSample {
    const HEADER: &'static [&'static str] = &["S0", "d0", "peak_ratio", "entry_step"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Float(self.init.s),
            Cell::Float(self.init.d),
            Cell::Float(self.peak_ratio),
            self.entry_step
                .map_or(Cell::Missing, |t| Cell::Int(t as u64)),
        ]
    }
}

impl CsvRow for ScaleRecord {
    const HEADER: &'static [&'static str] = &["N", "variance", "replicates"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Int(self.n as u64),
            Cell::Float(self.variance),
            Cell::Int(self.replicates as u64),
        ]
    }
}

impl CsvRow for HistoryRecord {
    const HEADER: &'static [&'static str] = &["t", "distance", "incentive_gap", "d_a", "d_b"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Int(self.t as u64),
            Cell::Float(self.distance),
            Cell::Float(self.incentive_gap),
            Cell::Float(self.d_a),
            Cell::Float(self.d_b),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: usize, d: f64) -> StepRecord {
        StepRecord {
            t,
            s: 0.1 + t as f64,
            d,
            g1: -1.0 / 3.0,
            g2: 1.0 / 3.0,
            l_global: 1e-300,
            x1: None,
            x2: None,
        }
    }

    #[test]
    fn trajectory_header_and_newline() {
        let out = String::from_utf8(render_csv(&[rec(0, 2.0)]).unwrap()).unwrap();
        assert!(out.starts_with("t,S,d,G1,G2,L_global\n0,"));
        assert!(out.ends_with('\n'));
        assert_eq!(out.lines().count(), 2);
    }

    #[test]
    fn empty_records_give_header_only() {
        let out = render_csv::<EwsRecord>(&[]).unwrap();
        assert_eq!(out, b"beta,variance,lag1_ac,tau_theory,tau_measured\n");
    }

    #[test]
    fn floats_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-308,
            f64::MAX,
            5e-324,
            0.0,
            -0.0,
            1.58113883008419,
        ] {
            let back: f64 = format_float(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn json_keys_sorted_and_wrapped() {
        let meta = RunMetadata {
            tool: "fcms",
            version: "0",
            subcommand: "eigen".into(),
            config: BTreeMap::new(),
            seed: 42,
            prng: "x",
            diverged: false,
            diverged_at: None,
            files: vec![],
            summary: Value::Null,
        };
        #[derive(Serialize)]
        struct R {
            zeta: f64,
            alpha: f64,
        }
        let out = String::from_utf8(
            render_json(
                &R {
                    zeta: 1.0,
                    alpha: 2.0,
                },
                &meta,
            )
            .unwrap(),
        )
        .unwrap();
        let (a, z) = (
            out.find("\"alpha\"").unwrap(),
            out.find("\"zeta\"").unwrap(),
        );
        assert!(a < z);
        assert!(out.find("\"metadata\"").unwrap() < out.find("\"report\"").unwrap());
        assert!(!out.contains("diverged_at"));
    }
}
