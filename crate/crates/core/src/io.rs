//! CSV logs, steady-sample files and plain-text fit reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a log
//! read back is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimation::{FitResult, FrictionFit, SteadySample};
use crate::signals::{LogRow, ResponseLog};

pub const SAMPLE_COLUMNS: [&str; 4] = ["wheel_id", "essay_id", "omega", "voltage"];

pub const COMPARISON_COLUMNS: [&str; 10] = [
    "t", "v_ref", "vn_ref", "w_ref", "v_meas", "vn_meas", "w_meas", "v_sim", "vn_sim", "w_sim",
];

fn data_err(origin: &Path, message: impl Into<String>) -> Error {
    Error::Data {
        path: origin.to_path_buf(),
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(origin: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: origin.to_path_buf(),
            source,
        },
        kind => data_err(origin, format!("{kind:?}")),
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(io_err(path))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(io_err(path))
}

fn check_header(origin: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if found != expected {
        return Err(data_err(
            origin,
            format!("header is `{}`, expected `{}`", found.join(","), expected.join(",")),
        ));
    }
    Ok(())
}

fn parse_f64(origin: &Path, line: u64, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| data_err(origin, format!("line {line}: `{field}` is not a number")))
}

pub fn write_log<W: Write>(writer: W, log: &ResponseLog) -> Result<()> {
    let origin = PathBuf::from("<log>");
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LogRow::COLUMNS).map_err(csv_err(&origin))?;
    for row in log.rows() {
        w.write_record(row.to_array().iter().map(|x| x.to_string()))
            .map_err(csv_err(&origin))?;
    }
    w.flush().map_err(io_err(&origin))
}

pub fn write_log_file(path: &Path, log: &ResponseLog) -> Result<()> {
    write_log(create(path)?, log).map_err(|e| relabel(e, path))
}

/// Reads a log and recovers its sample period from the time column. A
/// single-row log has no spacing to measure, so it takes `period_hint`.
pub fn read_log<R: Read>(reader: R, origin: &Path, period_hint: Option<f64>) -> Result<ResponseLog> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers().map_err(csv_err(origin))?.clone();
    check_header(origin, &header, &LogRow::COLUMNS)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(origin))?;
        let line = i as u64 + 2;
        let mut a = [0.0; 13];
        for (k, slot) in a.iter_mut().enumerate() {
            *slot = parse_f64(origin, line, &rec[k])?;
        }
        rows.push(LogRow::from_array(a));
    }
    if rows.is_empty() {
        return Err(data_err(origin, "log has no rows"));
    }
    let period = if rows.len() >= 2 {
        let p = rows[1].t - rows[0].t;
        for (k, row) in rows.iter().enumerate() {
            if (row.t - rows[0].t - k as f64 * p).abs() > 1e-6 * p {
                return Err(data_err(origin, format!("non-uniform sample spacing at row {}", k + 1)));
            }
        }
        p
    } else {
        period_hint.ok_or_else(|| data_err(origin, "single-row log has no sample period"))?
    };
    ResponseLog::new(period, rows).map_err(|e| data_err(origin, e.to_string()))
}

pub fn read_log_file(path: &Path, period_hint: Option<f64>) -> Result<ResponseLog> {
    read_log(open(path)?, path, period_hint)
}

pub fn write_samples<W: Write>(writer: W, samples: &[SteadySample]) -> Result<()> {
    let origin = PathBuf::from("<samples>");
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SAMPLE_COLUMNS).map_err(csv_err(&origin))?;
    for s in samples {
        w.write_record([
            s.wheel_id.to_string(),
            s.essay_id.clone(),
            s.omega_shaft.to_string(),
            s.voltage.to_string(),
        ])
        .map_err(csv_err(&origin))?;
    }
    w.flush().map_err(io_err(&origin))
}

pub fn write_samples_file(path: &Path, samples: &[SteadySample]) -> Result<()> {
    write_samples(create(path)?, samples).map_err(|e| relabel(e, path))
}

pub fn read_samples<R: Read>(reader: R, origin: &Path) -> Result<Vec<SteadySample>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_err(origin))?.clone();
    check_header(origin, &header, &SAMPLE_COLUMNS)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(origin))?;
        let line = i as u64 + 2;
        let wheel_id = rec[0]
            .trim()
            .parse()
            .map_err(|_| data_err(origin, format!("line {line}: bad wheel_id `{}`", &rec[0])))?;
        out.push(SteadySample {
            wheel_id,
            essay_id: rec[1].trim().to_string(),
            omega_shaft: parse_f64(origin, line, &rec[2])?,
            voltage: parse_f64(origin, line, &rec[3])?,
        });
    }
    Ok(out)
}

pub fn read_samples_file(path: &Path) -> Result<Vec<SteadySample>> {
    read_samples(open(path)?, path)
}

/// Measured and simulated body responses side by side, for plotting.
pub fn write_comparison<W: Write>(writer: W, measured: &ResponseLog, simulated: &ResponseLog) -> Result<()> {
    let origin = PathBuf::from("<comparison>");
    if measured.len() != simulated.len() {
        return Err(Error::LengthMismatch {
            simulated: simulated.len(),
            measured: measured.len(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COMPARISON_COLUMNS).map_err(csv_err(&origin))?;
    for (m, s) in measured.rows().iter().zip(simulated.rows()) {
        let vals = [
            m.t,
            m.reference.v,
            m.reference.vn,
            m.reference.omega,
            m.response.v,
            m.response.vn,
            m.response.omega,
            s.response.v,
            s.response.vn,
            s.response.omega,
        ];
        w.write_record(vals.iter().map(|x| x.to_string()))
            .map_err(csv_err(&origin))?;
    }
    w.flush().map_err(io_err(&origin))
}

pub fn write_comparison_file(path: &Path, measured: &ResponseLog, simulated: &ResponseLog) -> Result<()> {
    write_comparison(create(path)?, measured, simulated).map_err(|e| relabel(e, path))
}

pub fn write_history_file(path: &Path, fit: &FitResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["iteration", "cost"]).map_err(csv_err(path))?;
    for (i, c) in fit.cost_history.iter().enumerate() {
        w.write_record([i.to_string(), c.to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_text_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        Error::Data { message, .. } => Error::Data {
            path: path.to_path_buf(),
            message,
        },
        e => e,
    }
}

/// `key=value` lines, one per fitted parameter plus the run statistics.
pub fn fit_report(fit: &FitResult) -> String {
    let mut s = String::new();
    for (n, p) in fit.names.iter().zip(&fit.params) {
        let _ = writeln!(s, "{n}={p}");
    }
    let _ = writeln!(s, "initial_cost={}", fit.initial_cost);
    let _ = writeln!(s, "final_cost={}", fit.final_cost);
    let _ = writeln!(s, "iterations={}", fit.iterations);
    let _ = writeln!(s, "evaluations={}", fit.evaluations);
    let _ = writeln!(s, "converged={}", fit.converged);
    s
}

pub fn friction_report(fit: &FrictionFit, n_samples: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "b_viscous={}", fit.b_viscous);
    let _ = writeln!(s, "f_coulomb={}", fit.f_coulomb);
    let _ = writeln!(s, "slope={}", fit.slope);
    let _ = writeln!(s, "intercept={}", fit.intercept);
    let _ = writeln!(s, "residual_rms={}", fit.residual_rms);
    let _ = writeln!(s, "samples={n_samples}");
    let _ = writeln!(s, "nonphysical={}", fit.nonphysical);
    s
}
