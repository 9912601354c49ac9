//! Plain-text output: wave-function snapshots, norm logs and operator dumps.
//!
//! Snapshot files hold one `x y re im` row per interior node in the mesh's
//! lexicographic order, printed with 17 significant digits so that a read
//! reproduces the coefficients exactly. Boundary values are zero and are not
//! stored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::assembly::Operators;
use crate::error::{Error, Result};
use crate::flows::StepInfo;
use crate::mesh::Mesh;
use crate::sparse::write_diagonal_matrix_market;

/// Node coordinates may differ by this much (relative to the domain size)
/// when a snapshot is matched against a mesh.
const COORD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub points: Vec<(f64, f64)>,
    pub values: Vec<Complex64>,
}

/// File name used for the snapshot at time `t`.
pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{t:.6}.txt")
}

pub fn write_snapshot(
    path: &Path,
    mesh: &Mesh,
    coeffs: &[Complex64],
    t: f64,
    header: &str,
) -> Result<()> {
    if coeffs.len() != mesh.num_interior() {
        return Err(Error::Dimension {
            expected: mesh.num_interior(),
            got: coeffs.len(),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(header.as_bytes())?;
    writeln!(w, "# t = {t:.16e}")?;
    writeln!(w, "# x y re im")?;
    for (&(x, y), c) in mesh.interior_coords().iter().zip(coeffs) {
        writeln!(w, "{x:.16e} {y:.16e} {:.16e} {:.16e}", c.re, c.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let reader = BufReader::new(File::open(path)?);
    let mut t = None;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("t =") {
                t = Some(v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad time: {e}"),
                })?);
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<f64> = trimmed
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad number: {e}"),
            })?;
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 columns, found {}", fields.len()),
            });
        }
        points.push((fields[0], fields[1]));
        values.push(Complex64::new(fields[2], fields[3]));
    }
    let t = t.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing `# t = ...` header".into(),
    })?;
    Ok(Snapshot { t, points, values })
}

impl Snapshot {
    /// Coefficients on `mesh`. The snapshot must have been written on a mesh
    /// with the same interior nodes.
    pub fn coefficients_on(&self, mesh: &Mesh) -> Result<Vec<Complex64>> {
        if self.points.len() != mesh.num_interior() {
            return Err(Error::Dimension {
                expected: mesh.num_interior(),
                got: self.points.len(),
            });
        }
        let d = mesh.domain();
        let scale = d.width().max(d.height());
        for (k, (&(x, y), &(mx, my))) in self.points.iter().zip(&mesh.interior_coords()).enumerate()
        {
            if (x - mx).abs() > COORD_TOL * scale || (y - my).abs() > COORD_TOL * scale {
                return Err(Error::Input(format!(
                    "snapshot node {k} at ({x}, {y}) does not match mesh node ({mx}, {my})"
                )));
            }
        }
        Ok(self.values.clone())
    }
}

/// Per-step norm history, written as `step,t,norm,relative_drift`.
#[derive(Debug, Clone, Default)]
pub struct NormLog {
    initial: f64,
    rows: Vec<StepInfo>,
}

impl NormLog {
    pub fn new(initial_norm: f64) -> Self {
        Self {
            initial: initial_norm,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, info: StepInfo) {
        self.rows.push(info);
    }

    pub fn max_drift(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.norm - self.initial).abs() / self.initial)
            .fold(0.0, f64::max)
    }

    pub fn write(&self, path: &Path, header: &str) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(header.as_bytes())?;
        writeln!(w, "step,t,norm,relative_drift")?;
        writeln!(w, "0,0,{:.16e},0", self.initial)?;
        for r in &self.rows {
            let drift = (r.norm - self.initial).abs() / self.initial;
            writeln!(w, "{},{:.16e},{:.16e},{drift:.6e}", r.step, r.t, r.norm)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `mass.mtx` (diagonal) and `stiffness.mtx` into `dir`.
pub fn dump_operators(dir: &Path, ops: &Operators) -> Result<(PathBuf, PathBuf)> {
    let m = dir.join("mass.mtx");
    let k = dir.join("stiffness.mtx");
    let mut w = BufWriter::new(File::create(&m)?);
    write_diagonal_matrix_market(ops.mass(), &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&k)?);
    ops.stiffness().write_matrix_market(&mut w)?;
    w.flush()?;
    Ok((m, k))
}
