//! CSV reports and legacy VTK snapshots.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::driver::CycleRecord;
use crate::estimate::EstimatorResult;
use crate::fespace::FeSpace;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub const CSV_HEADER: &str = "cycle,n_cells,n_dofs,mode,smoother,smoothing_steps,error_h1,estimator_J,estimator_J_exact,solver_iterations,matvec_count,solve_seconds,marked_cells";

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv { path: path.to_path_buf(), source }
}

/// Writes any serializable rows with a header taken from the field names.
pub fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<(), OutputError> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        writer.serialize(row).map_err(csv_err(path))?;
    }
    writer.flush().map_err(io_err(path))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, OutputError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    reader.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

pub fn write_csv(records: &[CycleRecord], path: &Path) -> Result<(), OutputError> {
    if records.is_empty() {
        // serde only emits the header together with the first row.
        return std::fs::write(path, format!("{CSV_HEADER}\n")).map_err(io_err(path));
    }
    write_rows(records, path)
}

pub fn read_csv(path: &Path) -> Result<Vec<CycleRecord>, OutputError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(OutputError::Format { path: path.to_path_buf(), message: format!("unexpected header '{header}'") });
    }
    reader.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

/// Legacy ASCII VTK file with the solution at cell corners and the
/// indicator and marking flag per cell. Higher-degree solutions are sampled
/// at the corners only.
pub fn write_vtk(
    space: &FeSpace,
    u: &[f64],
    estimator: &EstimatorResult,
    marked: &[usize],
    path: &Path,
) -> Result<(), OutputError> {
    space.check_len(u).map_err(|e| OutputError::Format { path: path.to_path_buf(), message: e.to_string() })?;
    let mesh = space.mesh();
    let cells = mesh.active_cells();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "adaptive solution")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        // Points are duplicated per cell so that each cell carries its own
        // corner samples.
        writeln!(w, "POINTS {} double", 4 * cells.len())?;
        let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let mut values = Vec::with_capacity(4 * cells.len());
        for &c in cells {
            let lo = mesh.cell_origin(c);
            let h = mesh.cell_size(c);
            for xi in corners {
                writeln!(w, "{} {} 0", lo[0] + xi[0] * h, lo[1] + xi[1] * h)?;
                values.push(space.evaluate_in_cell(c, u, xi).0);
            }
        }
        writeln!(w, "CELLS {} {}", cells.len(), 5 * cells.len())?;
        for k in 0..cells.len() {
            writeln!(w, "4 {} {} {} {}", 4 * k, 4 * k + 1, 4 * k + 2, 4 * k + 3)?;
        }
        writeln!(w, "CELL_TYPES {}", cells.len())?;
        for _ in cells {
            writeln!(w, "9")?;
        }
        writeln!(w, "POINT_DATA {}", values.len())?;
        writeln!(w, "SCALARS solution double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in &values {
            writeln!(w, "{v}")?;
        }
        writeln!(w, "CELL_DATA {}", cells.len())?;
        writeln!(w, "SCALARS eta double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for &c in cells {
            writeln!(w, "{}", estimator.get(c).unwrap_or(0.0))?;
        }
        writeln!(w, "SCALARS marked int 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for c in cells {
            writeln!(w, "{}", u8::from(marked.binary_search(c).is_ok()))?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{Mode, Smoother};

    fn record(cycle: usize, exact: Option<f64>) -> CycleRecord {
        CycleRecord {
            cycle,
            n_cells: 16 * cycle,
            n_dofs: 25 * cycle,
            mode: Mode::Safem,
            smoother: Smoother::Richardson,
            smoothing_steps: 3,
            error_h1: 0.1 / cycle as f64,
            estimator_j: 0.3 / 7.0,
            estimator_j_exact: exact,
            solver_iterations: 3,
            matvec_count: 24,
            solve_seconds: 1e-4,
            marked_cells: 5,
        }
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let records = vec![record(1, Some(0.25)), record(2, None)];
        write_csv(&records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert!(text.lines().nth(2).unwrap().contains(",,"));
        assert_eq!(read_csv(&path).unwrap(), records);
    }

    #[test]
    fn empty_csv_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_csv(&[], &path).unwrap();
        assert!(read_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn unwritable_path_names_the_file() {
        let err = write_csv(&[record(1, None)], Path::new("/nonexistent/dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.csv"));
    }
}
