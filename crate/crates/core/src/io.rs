//! Artifact persistence: CSV field files, run manifests, and summaries.
//!
//! Spatial fields are written row-major with an `x[,y],value` header; values
//! use 17 significant digits so a read-back reproduces every bit. Time series
//! of scalar diagnostics use a `t,<name>...` header. Trajectories become one
//! file per level, `phi_0000.csv` and so on.

use crate::error::{Error, Result};
use crate::grid::{FieldSeries, GridSpec, ScalarField, TimeGrid};
use crate::state::StateTrajectory;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Full-precision decimal form: 17 significant digits round-trip any f64.
pub fn format_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

pub fn write_spatial_csv(path: &Path, grid: &GridSpec, field: &ScalarField) -> Result<()> {
    if field.len() != grid.node_count() {
        return Err(Error::GridMismatch {
            context: "write_spatial_csv",
            expected: grid.node_count(),
            got: field.len(),
        });
    }
    let mut out = String::new();
    if grid.dimension() == 1 {
        out.push_str("x,value\n");
        for i in 0..field.len() {
            let (x, _) = grid.node_coords(i);
            let _ = writeln!(out, "{},{}", format_f64(x), format_f64(field.values[i]));
        }
    } else {
        out.push_str("x,y,value\n");
        for i in 0..field.len() {
            let (x, y) = grid.node_coords(i);
            let _ = writeln!(
                out,
                "{},{},{}",
                format_f64(x),
                format_f64(y),
                format_f64(field.values[i])
            );
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_spatial_csv(path: &Path, grid: &GridSpec) -> Result<ScalarField> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(grid.node_count());
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let last = line.rsplit(',').next().ok_or_else(|| {
            Error::Config(format!("malformed CSV line {} in {}", ln + 1, path.display()))
        })?;
        let v: f64 = last.trim().parse().map_err(|_| {
            Error::Config(format!(
                "invalid float '{last}' on line {} of {}",
                ln + 1,
                path.display()
            ))
        })?;
        values.push(v);
    }
    if values.len() != grid.node_count() {
        return Err(Error::GridMismatch {
            context: "read_spatial_csv",
            expected: grid.node_count(),
            got: values.len(),
        });
    }
    Ok(ScalarField::from_values(values))
}

/// One file per time level: `<prefix>_0000.csv`, `<prefix>_0001.csv`, ...
pub fn write_series(dir: &Path, prefix: &str, grid: &GridSpec, series: &FieldSeries) -> Result<()> {
    for (k, field) in series.iter().enumerate() {
        let path = dir.join(format!("{prefix}_{k:04}.csv"));
        write_spatial_csv(&path, grid, field)?;
    }
    Ok(())
}

pub fn write_trajectory(dir: &Path, grid: &GridSpec, traj: &StateTrajectory) -> Result<()> {
    write_series(dir, "phi", grid, &traj.phi)?;
    write_series(dir, "w", grid, &traj.w)?;
    write_series(dir, "v", grid, &traj.v)?;
    write_series(dir, "xi", grid, &traj.xi)?;
    Ok(())
}

/// Scalar diagnostics over time: header `t,<name>,...`.
pub fn write_timeseries_csv(
    path: &Path,
    tg: &TimeGrid,
    names: &[&str],
    columns: &[Vec<f64>],
) -> Result<()> {
    if names.len() != columns.len() {
        return Err(Error::Config("column name/count mismatch".into()));
    }
    let mut out = String::from("t");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for k in 0..tg.levels() {
        let _ = write!(out, "{}", format_f64(tg.node_time(k)));
        for col in columns {
            let _ = write!(out, ",{}", format_f64(col[k]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Generic small table: caller provides header and rows.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Create `<root>/<command>-<epoch-seconds>[-n]/`, never clobbering.
pub fn create_run_dir(root: &Path, command: &str) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    for attempt in 0..1000u32 {
        let name = if attempt == 0 {
            format!("{command}-{stamp}")
        } else {
            format!("{command}-{stamp}-{attempt}")
        };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::Config("cannot allocate a fresh run directory".into()))
}
