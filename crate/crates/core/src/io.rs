//! Deterministic text output: every float is printed with a fixed scientific
//! format and lines end with a bare newline, so identical runs produce
//! byte-identical files on any platform.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::field::Grid;
use crate::mras::DiagnosticsRow;
use crate::report::VerificationReport;
use crate::trajectory::Trajectory;

/// Fixed-width scientific rendering used for all numeric output.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a single field as `x,value` rows.
pub fn write_field_csv(path: &Path, grid: Grid, values: &[f64]) -> io::Result<()> {
    assert_eq!(values.len(), grid.n);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"x,value\n")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{},{}", fmt_float(grid.x(i)), fmt_float(*v))?;
    }
    w.flush()
}

/// Writes a scalar time series with the given column labels.
pub fn write_series_csv(
    path: &Path,
    labels: (&str, &str),
    times: &[f64],
    values: &[f64],
) -> io::Result<()> {
    assert_eq!(times.len(), values.len());
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},{}", labels.0, labels.1)?;
    for (t, v) in times.iter().zip(values) {
        writeln!(w, "{},{}", fmt_float(*t), fmt_float(*v))?;
    }
    w.flush()
}

/// Writes the per-step run diagnostics.
pub fn write_diagnostics_csv(path: &Path, rows: &[DiagnosticsRow]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"t,energy,err_q_H,err_r_H,err_r_V,gamma,lipschitz,sigma\n")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_float(r.t),
            fmt_float(r.energy),
            fmt_float(r.err_q_h),
            fmt_float(r.err_r_h),
            fmt_float(r.err_r_v),
            fmt_float(r.gamma),
            fmt_float(r.lipschitz),
            r.sigma
        )?;
    }
    w.flush()
}

/// Writes all snapshots of a trajectory, one row per time.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = String::from("t");
    for i in 0..traj.grid.n {
        header.push_str(&format!(",x{i}"));
    }
    writeln!(w, "{header}")?;
    for k in 0..traj.len() {
        let mut line = fmt_float(traj.time(k));
        for v in traj.snapshot(k) {
            line.push(',');
            line.push_str(&fmt_float(*v));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

/// Serializes any value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Human-readable report rendering, one line per entry.
pub fn render_report_text(report: &VerificationReport) -> String {
    let mut out = String::new();
    for e in &report.entries {
        let mark = if e.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!(
            "[{mark}] {} measured={} bound={} slack={}",
            e.name,
            fmt_float(e.measured),
            fmt_float(e.bound),
            fmt_float(e.slack)
        ));
        if let Some(loc) = &e.location {
            out.push_str(&format!(" at {loc}"));
        }
        if !e.note.is_empty() {
            out.push_str(&format!(" ({})", e.note));
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "{} of {} checks passed\n",
        report.entries.iter().filter(|e| e.passed).count(),
        report.entries.len()
    ));
    out
}

/// Writes report.json and report.txt into the directory.
pub fn write_report(dir: &Path, report: &VerificationReport) -> io::Result<()> {
    write_json(&dir.join("report.json"), report)?;
    std::fs::write(dir.join("report.txt"), render_report_text(report))
}
