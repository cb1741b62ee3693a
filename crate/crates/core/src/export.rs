//! Solution export as CSV (`edge,k,t,x,u,du_dx`) or JSON lines.
//!
//! Rows run edge-major, then snapshot, then node; the vertex row appears
//! once per edge. Reals are written with 17 significant digits so a read
//! back reproduces every value bit for bit.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{node_derivatives, GridFunction};
use crate::rothe::ParabolicSolution;
use crate::scalar::Real;
use crate::shooting::EllipticSolution;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("snapshots and times differ in length ({snapshots} vs {times})")]
    Incomplete { snapshots: usize, times: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" => Ok(ExportFormat::Jsonl),
            other => Err(format!("unknown format `{other}` (expected csv or jsonl)")),
        }
    }
}

pub const CSV_HEADER: &str = "edge,k,t,x,u,du_dx";

#[derive(Serialize)]
struct Row {
    edge: usize,
    k: usize,
    t: f64,
    x: f64,
    u: f64,
    du_dx: f64,
}

/// Renders snapshots `u_k` at `times[k]` in the requested format.
pub fn render_snapshots<T: Real>(
    snapshots: &[GridFunction<T>],
    times: &[T],
    format: ExportFormat,
) -> Result<String, ExportError> {
    if snapshots.len() != times.len() || snapshots.is_empty() {
        return Err(ExportError::Incomplete {
            snapshots: snapshots.len(),
            times: times.len(),
        });
    }
    let grid = snapshots[0].grid();
    let mut out = String::new();
    if format == ExportFormat::Csv {
        out.push_str(CSV_HEADER);
        out.push('\n');
    }
    for edge in 0..grid.num_edges() {
        let xs = grid.coordinates(edge);
        for (k, (snap, t)) in snapshots.iter().zip(times).enumerate() {
            let u = snap.edge_nodes(edge);
            let du = node_derivatives(&u, grid.spacing(edge));
            for j in 0..u.len() {
                let row = Row {
                    edge,
                    k,
                    t: t.as_f64(),
                    x: xs[j].as_f64(),
                    u: u[j].as_f64(),
                    du_dx: du[j].as_f64(),
                };
                match format {
                    ExportFormat::Csv => {
                        let _ = writeln!(
                            out,
                            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                            row.edge, row.k, row.t, row.x, row.u, row.du_dx
                        );
                    }
                    ExportFormat::Jsonl => {
                        out.push_str(&serde_json::to_string(&row).expect("plain row"));
                        out.push('\n');
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Writes `contents` to a temporary file next to `path` and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ExportError> {
    let io = |source| ExportError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn export_solution<T: Real>(sol: &ParabolicSolution<T>, path: &Path, format: ExportFormat) -> Result<(), ExportError> {
    write_atomic(path, render_snapshots(&sol.snapshots, &sol.times, format)?.as_bytes())
}

/// A stationary solution exported as the single snapshot `k = 0, t = 0`.
pub fn export_elliptic<T: Real>(sol: &EllipticSolution<T>, path: &Path, format: ExportFormat) -> Result<(), ExportError> {
    let text = render_snapshots(std::slice::from_ref(&sol.solution), &[T::zero()], format)?;
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_junction, JunctionGrid};

    fn snapshots() -> (Vec<GridFunction<f64>>, Vec<f64>) {
        let grid = JunctionGrid::uniform(build_junction(2, &[1.0, 2.0]).unwrap(), 5).unwrap();
        let a = GridFunction::from_fn(grid.clone(), |e, x: f64| (e as f64 + 1.0) * x.sin() + 0.1);
        let b = a.map(|v| v / 3.0);
        (vec![a, b], vec![0.0, 0.25])
    }

    #[test]
    fn counts_rows_and_orders_them() {
        let grid = JunctionGrid::uniform(build_junction(1, &[1.0]).unwrap(), 3).unwrap();
        let u = GridFunction::from_fn(grid, |_, x| x * x);
        let text = render_snapshots(&[u.clone(), u], &[0.0, 1.0], ExportFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("0,0,0.0000000000000000e0,0.0000000000000000e0,"));
        assert!(lines[4].starts_with("0,1,"));

        let (s, t) = snapshots();
        let text = render_snapshots(&s, &t, ExportFormat::Csv).unwrap();
        let keys: Vec<(usize, usize)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let mut f = l.split(',');
                (f.next().unwrap().parse().unwrap(), f.next().unwrap().parse().unwrap())
            })
            .collect();
        assert_eq!(keys.len(), 2 * 2 * 5);
        assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn vertex_rows_agree_across_edges() {
        let (s, t) = snapshots();
        let text = render_snapshots(&s, &t, ExportFormat::Csv).unwrap();
        let vertex: Vec<Vec<&str>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[3].parse::<f64>().unwrap() == 0.0)
            .collect();
        assert_eq!(vertex.len(), 4);
        assert_eq!(vertex[0][4], vertex[2][4]);
        assert_eq!(vertex[1][4], vertex[3][4]);
    }

    #[test]
    fn round_trip_is_exact_and_files_are_identical() {
        let (s, t) = snapshots();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sol.csv");
        let text = render_snapshots(&s, &t, ExportFormat::Csv).unwrap();
        write_atomic(&path, text.as_bytes()).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_atomic(&path, text.as_bytes()).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());

        let body = String::from_utf8(first).unwrap();
        let read_sup = body
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(4).unwrap().parse::<f64>().unwrap().abs())
            .fold(0.0, f64::max);
        let sup = s.iter().map(|g| g.sup_norm()).fold(0.0, f64::max);
        assert!((read_sup - sup).abs() <= 1e-15);
        assert_eq!(read_sup, sup);
    }

    #[test]
    fn jsonl_matches_csv_values() {
        let (s, t) = snapshots();
        let csv = render_snapshots(&s, &t, ExportFormat::Csv).unwrap();
        let jsonl = render_snapshots(&s, &t, ExportFormat::Jsonl).unwrap();
        for (c, j) in csv.lines().skip(1).zip(jsonl.lines()) {
            let v: serde_json::Value = serde_json::from_str(j).unwrap();
            let u: f64 = c.split(',').nth(4).unwrap().parse().unwrap();
            assert_eq!(v["u"].as_f64().unwrap(), u);
        }
        assert_eq!("jsonl".parse::<ExportFormat>(), Ok(ExportFormat::Jsonl));
        assert!("xml".parse::<ExportFormat>().is_err());
    }

    #[test]
    fn mismatched_times_are_rejected() {
        let (s, _) = snapshots();
        assert!(matches!(
            render_snapshots(&s, &[0.0], ExportFormat::Csv),
            Err(ExportError::Incomplete { .. })
        ));
    }
}
