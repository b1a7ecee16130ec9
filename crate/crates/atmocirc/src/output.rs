//! On-disk artifacts: snapshot CSVs, the diagnostics CSV, the run manifest
//! and the output-directory lock.
//!
//! Snapshot layout: header `x1,x2,u1,u2,T,q,p`, one row per node, the x₂ row
//! index slow and the x₁ index fast, every value printed with 17 significant
//! digits so a reload is bit-identical.

use crate::diagnostics::DiagnosticsRecord;
use crate::fields::{Grid, ScalarField, State};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("output directory {0} is locked by another run (remove LOCK if stale)")]
    Locked(PathBuf),
}

fn io_err(path: &Path, source: std::io::Error) -> OutputError {
    OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> OutputError {
    OutputError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// 17-significant-digit decimal form; round-trips f64 exactly.
fn full_precision(x: f64) -> String {
    format!("{x:.16e}")
}

pub const SNAPSHOT_HEADER: &str = "x1,x2,u1,u2,T,q,p";

pub fn snapshot_name(step: u64) -> String {
    format!("snap_{step:06}.csv")
}

/// Write one state snapshot.
pub fn write_snapshot(path: &Path, state: &State) -> Result<(), OutputError> {
    let grid = state.grid();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{SNAPSHOT_HEADER}")?;
        for j in 0..grid.n2() {
            for i in 0..grid.n1() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    full_precision(grid.x1(i)),
                    full_precision(grid.x2(j)),
                    full_precision(state.u1.get(i, j)),
                    full_precision(state.u2.get(i, j)),
                    full_precision(state.temperature.get(i, j)),
                    full_precision(state.humidity.get(i, j)),
                    full_precision(state.pressure.get(i, j)),
                )?;
            }
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}

/// Read a snapshot back, inferring the grid from the coordinate columns and
/// checking that they are the canonical nodes.
pub fn read_snapshot(path: &Path) -> Result<State, OutputError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| io_err(path, e))?
        .ok_or_else(|| format_err(path, "empty file"))?;
    if header.trim() != SNAPSHOT_HEADER {
        return Err(format_err(
            path,
            format!("unexpected header `{header}`, wanted `{SNAPSHOT_HEADER}`"),
        ));
    }
    let mut rows: Vec<[f64; 7]> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = [0.0; 7];
        let mut fields = line.split(',');
        for slot in row.iter_mut() {
            let cell = fields.next().ok_or_else(|| {
                format_err(path, format!("row {}: expected 7 columns", idx + 2))
            })?;
            *slot = cell.trim().parse::<f64>().map_err(|_| {
                format_err(path, format!("row {}: bad number `{cell}`", idx + 2))
            })?;
        }
        if fields.next().is_some() {
            return Err(format_err(
                path,
                format!("row {}: more than 7 columns", idx + 2),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format_err(path, "no data rows"));
    }
    let first_x2 = rows[0][1];
    let n1 = rows.iter().take_while(|r| r[1] == first_x2).count();
    if n1 == 0 || !rows.len().is_multiple_of(n1) {
        return Err(format_err(path, "rows do not form an n1 × n2 grid"));
    }
    let n2 = rows.len() / n1;
    let grid = Grid::new(n1, n2).map_err(|e| format_err(path, e.to_string()))?;
    let mut state = State::zeros(grid);
    for (node, row) in rows.iter().enumerate() {
        let i = node % n1;
        let j = node / n1;
        let tol = 1e-12;
        if (row[0] - grid.x1(i)).abs() > tol || (row[1] - grid.x2(j)).abs() > tol {
            return Err(format_err(
                path,
                format!("node ({i}, {j}) has off-grid coordinates ({}, {})", row[0], row[1]),
            ));
        }
        state.u1.set(i, j, row[2]);
        state.u2.set(i, j, row[3]);
        state.temperature.set(i, j, row[4]);
        state.humidity.set(i, j, row[5]);
        state.pressure.set(i, j, row[6]);
    }
    Ok(state)
}

/// Forcing-field CSV: header `x1,x2,Q,G`, same node order as snapshots.
pub const FORCING_HEADER: &str = "x1,x2,Q,G";

pub fn write_forcing(path: &Path, heat: &ScalarField, moisture: &ScalarField) -> Result<(), OutputError> {
    let grid = heat.grid();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{FORCING_HEADER}")?;
        for j in 0..grid.n2() {
            for i in 0..grid.n1() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    full_precision(grid.x1(i)),
                    full_precision(grid.x2(j)),
                    full_precision(heat.get(i, j)),
                    full_precision(moisture.get(i, j)),
                )?;
            }
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}

pub fn read_forcing(path: &Path) -> Result<(ScalarField, ScalarField), OutputError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| io_err(path, e))?
        .ok_or_else(|| format_err(path, "empty file"))?;
    if header.trim() != FORCING_HEADER {
        return Err(format_err(
            path,
            format!("unexpected header `{header}`, wanted `{FORCING_HEADER}`"),
        ));
    }
    let mut rows: Vec<[f64; 4]> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = [0.0; 4];
        let mut fields = line.split(',');
        for slot in row.iter_mut() {
            let cell = fields.next().ok_or_else(|| {
                format_err(path, format!("row {}: expected 4 columns", idx + 2))
            })?;
            *slot = cell.trim().parse::<f64>().map_err(|_| {
                format_err(path, format!("row {}: bad number `{cell}`", idx + 2))
            })?;
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format_err(path, "no data rows"));
    }
    let first_x2 = rows[0][1];
    let n1 = rows.iter().take_while(|r| r[1] == first_x2).count();
    if n1 == 0 || !rows.len().is_multiple_of(n1) {
        return Err(format_err(path, "rows do not form an n1 × n2 grid"));
    }
    let n2 = rows.len() / n1;
    let grid = Grid::new(n1, n2).map_err(|e| format_err(path, e.to_string()))?;
    let mut heat = ScalarField::zeros(grid, false);
    let mut moisture = ScalarField::zeros(grid, false);
    for (node, row) in rows.iter().enumerate() {
        let i = node % n1;
        let j = node / n1;
        heat.set(i, j, row[2]);
        moisture.set(i, j, row[3]);
    }
    Ok((heat, moisture))
}

/// Streaming writer for `diagnostics.csv`: fixed columns plus one weak
/// residual column per test function.
pub struct DiagnosticsWriter {
    writer: BufWriter<File>,
    path: PathBuf,
    columns: usize,
}

impl DiagnosticsWriter {
    pub fn create(path: &Path, residual_names: &[String]) -> Result<Self, OutputError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut writer = BufWriter::new(file);
        let mut header = String::from("time,E,D,div_inf,adv_total,press_work,A1_margin");
        for name in residual_names {
            header.push_str(",wres_");
            header.push_str(name);
        }
        writeln!(writer, "{header}").map_err(|e| io_err(path, e))?;
        Ok(DiagnosticsWriter {
            writer,
            path: path.to_path_buf(),
            columns: residual_names.len(),
        })
    }

    pub fn append(&mut self, record: &DiagnosticsRecord) -> Result<(), OutputError> {
        assert_eq!(record.weak_residuals.len(), self.columns);
        let mut line = format!(
            "{},{},{},{},{},{},{}",
            full_precision(record.time),
            full_precision(record.energy),
            full_precision(record.dissipation),
            full_precision(record.divergence_inf),
            full_precision(record.budget.advection_total),
            full_precision(record.budget.pressure_work),
            full_precision(record.a1.margin),
        );
        for r in &record.weak_residuals {
            line.push(',');
            line.push_str(&full_precision(*r));
        }
        writeln!(self.writer, "{line}").map_err(|e| io_err(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<(), OutputError> {
        self.writer.flush().map_err(|e| io_err(&self.path, e))
    }
}

/// Exclusive lock on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, OutputError> {
        let path = dir.join("LOCK");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "pid {}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(OutputError::Locked(dir.to_path_buf()))
            }
            Err(e) => Err(io_err(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// List `snap_XXXXXX.csv` files in a directory, sorted by step index.
pub fn list_snapshots(dir: &Path) -> Result<Vec<(u64, PathBuf)>, OutputError> {
    let mut snaps = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name.strip_prefix("snap_").and_then(|s| s.strip_suffix(".csv")) {
            if let Ok(step) = stem.parse::<u64>() {
                snaps.push((step, entry.path()));
            }
        }
    }
    snaps.sort_by_key(|(step, _)| *step);
    Ok(snaps)
}

pub fn write_manifest(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use std::f64::consts::PI;

    fn sample_state() -> State {
        let g = Grid::new(8, 9).unwrap();
        let mut s = State::zeros(g);
        s.u1 = ScalarField::from_fn(g, true, |x1, x2| x1.sin() * (PI * x2).sin() / 3.0);
        s.temperature = ScalarField::from_fn(g, true, |x1, x2| (x1 * 0.77).cos() * x2 * (1.0 - x2));
        s.pressure = ScalarField::from_fn(g, false, |x1, _| 0.1 + x1.cos() / 7.0);
        s
    }

    #[test]
    fn snapshot_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(snapshot_name(42));
        let state = sample_state();
        write_snapshot(&path, &state).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(state.u1.values(), back.u1.values());
        assert_eq!(state.u2.values(), back.u2.values());
        assert_eq!(state.temperature.values(), back.temperature.values());
        assert_eq!(state.humidity.values(), back.humidity.values());
        assert_eq!(state.pressure.values(), back.pressure.values());
    }

    #[test]
    fn snapshot_reader_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,y\n1,2\n").unwrap();
        assert!(matches!(
            read_snapshot(&path),
            Err(OutputError::Format { .. })
        ));
    }

    #[test]
    fn forcing_round_trip() {
        let g = Grid::new(8, 9).unwrap();
        let heat = ScalarField::from_fn(g, false, |x1, x2| x1.cos() + x2);
        let moisture = ScalarField::from_fn(g, false, |x1, _| 0.25 * x1.sin());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forcing.csv");
        write_forcing(&path, &heat, &moisture).unwrap();
        let (h, m) = read_forcing(&path).unwrap();
        assert_eq!(heat.values(), h.values());
        assert_eq!(moisture.values(), m.values());
    }

    #[test]
    fn lock_excludes_second_acquisition() {
        let dir = tempfile::tempdir().unwrap();
        let lock = DirLock::acquire(dir.path()).unwrap();
        assert!(matches!(
            DirLock::acquire(dir.path()),
            Err(OutputError::Locked(_))
        ));
        drop(lock);
        let again = DirLock::acquire(dir.path());
        assert!(again.is_ok());
    }

    #[test]
    fn snapshot_listing_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let state = sample_state();
        for step in [30u64, 0, 10, 20] {
            write_snapshot(&dir.path().join(snapshot_name(step)), &state).unwrap();
        }
        std::fs::write(dir.path().join("unrelated.txt"), "x").unwrap();
        let snaps = list_snapshots(dir.path()).unwrap();
        let steps: Vec<u64> = snaps.iter().map(|(s, _)| *s).collect();
        assert_eq!(steps, vec![0, 10, 20, 30]);
    }
}
