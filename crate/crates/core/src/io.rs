//! CSV and JSON exports. Numbers use Rust's shortest round-trip formatting,
//! which is exact and independent of locale.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::propagate::DrivenRunResult;
use crate::signal::{Spectrum, TimeSeries};
use crate::tracking::TrackingResult;

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Header plus rows of numbers.
pub fn write_table(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_atomic(path, &bytes)
}

/// `t,value`.
pub fn write_series(path: &Path, s: &TimeSeries) -> Result<()> {
    write_table(
        path,
        &["t", "value"],
        s.values
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![s.time(i), v]),
    )
}

/// `omega_over_omega0,abs_amplitude` over non-negative frequencies.
pub fn write_spectrum(path: &Path, spec: &Spectrum, omega0: f64) -> Result<()> {
    write_table(
        path,
        &["omega_over_omega0", "abs_amplitude"],
        spec.one_sided()
            .into_iter()
            .map(|(w, a)| vec![w / omega0, a]),
    )
}

/// `t,E,y,p,Vprime,A,norm`.
pub fn write_run(path: &Path, run: &DrivenRunResult) -> Result<()> {
    let f = &run.field;
    write_table(
        path,
        &["t", "E", "y", "p", "Vprime", "A", "norm"],
        (0..f.len()).map(|i| {
            vec![
                f.time(i),
                f.values[i],
                run.y.values[i],
                run.p.values[i],
                run.vprime.values[i],
                run.a.values[i],
                run.norm.values[i],
            ]
        }),
    )
}

/// `t,E,y,Y,abs_err`.
pub fn write_tracking(path: &Path, r: &TrackingResult) -> Result<()> {
    write_table(
        path,
        &["t", "E", "y", "Y", "abs_err"],
        (0..r.field.len()).map(|i| {
            vec![
                r.field.time(i),
                r.field.values[i],
                r.y.values[i],
                r.target.values[i],
                r.per_step_error.values[i],
            ]
        }),
    )
}

/// `x,psi` for one real state.
pub fn write_state(path: &Path, x: &[f64], psi: &[f64]) -> Result<()> {
    write_table(
        path,
        &["x", "psi"],
        x.iter().zip(psi).map(|(&a, &b)| vec![a, b]),
    )
}

/// Reads a `t,value` file on a uniform grid.
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
    let headers = r.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
        return Err(parse_err(format!(
            "expected header t,value, found {headers:?}"
        )));
    }
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let num = |i: usize| {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(format!("row {}: {e}", line + 2)))
        };
        t.push(num(0)?);
        v.push(num(1)?);
    }
    if t.len() < 2 {
        return Err(parse_err("need at least two samples".into()));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    for (i, ti) in t.iter().enumerate() {
        if (ti - (t[0] + i as f64 * dt)).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(parse_err(format!(
                "row {}: time grid is not uniform",
                i + 2
            )));
        }
    }
    TimeSeries::new(t[0], dt, v)
}
