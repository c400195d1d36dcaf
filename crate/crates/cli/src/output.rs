//! Diagnostics CSV, saturation profiles and legacy VTK snapshots.

use richards_core::diagnostics::format_real;
use richards_core::{Mesh, SoilModel, StepDiagnostics};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Row-by-row diagnostics writer; every row is flushed so that a failed run
/// leaves a complete prefix on disk.
pub struct DiagnosticsCsv<W: Write> {
    out: W,
}

impl DiagnosticsCsv<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        DiagnosticsCsv::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> DiagnosticsCsv<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{}", StepDiagnostics::csv_header())?;
        out.flush()?;
        Ok(DiagnosticsCsv { out })
    }

    pub fn write(&mut self, d: &StepDiagnostics) -> io::Result<()> {
        writeln!(self.out, "{}", d.to_csv_row())?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn diagnostics_csv_string(rows: &[StepDiagnostics]) -> String {
    let mut s = StepDiagnostics::csv_header();
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv_row());
        s.push('\n');
    }
    s
}

/// `(z, theta)` samples along the vertical line `x = x0`, one per distinct
/// vertex height. Interval meshes ignore `x0`.
pub fn vertical_profile(mesh: &Mesh, model: &SoilModel, u: &[f64], x0: f64) -> Vec<(f64, f64)> {
    let mut zs: Vec<f64> = (0..mesh.n_vertices()).map(|v| mesh.height(v)).collect();
    zs.sort_by(f64::total_cmp);
    zs.dedup();
    zs.into_iter()
        .filter_map(|z| {
            let point = if mesh.dim() == 1 { [z, 0.0] } else { [x0, z] };
            let (e, w) = mesh.locate(point)?;
            let value: f64 = mesh.element(e).iter().zip(w).map(|(&v, wi)| wi * u[v]).sum();
            Some((z, model.theta(value)))
        })
        .collect()
}

pub fn write_profile(path: &Path, profile: &[(f64, f64)]) -> io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "z,theta")?;
    for (z, t) in profile {
        writeln!(f, "{},{}", format_real(*z), format_real(*t))?;
    }
    f.flush()
}

/// Legacy ASCII VTK unstructured grid with `theta` and `u` point data.
pub fn write_vtk<W: Write>(out: &mut W, mesh: &Mesh, model: &SoilModel, u: &[f64], time: f64) -> io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "saturation t={}", format_real(time))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for v in 0..mesh.n_vertices() {
        let (x, z) = (mesh.horizontal(v), mesh.height(v));
        if mesh.dim() == 1 {
            writeln!(out, "0 {z} 0")?;
        } else {
            writeln!(out, "{x} {z} 0")?;
        }
    }
    let k = mesh.dim() + 1;
    writeln!(out, "CELLS {} {}", mesh.n_elements(), mesh.n_elements() * (k + 1))?;
    for conn in mesh.elements() {
        write!(out, "{k}")?;
        for v in conn {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.n_elements())?;
    let cell_type = if mesh.dim() == 1 { 3 } else { 5 };
    for _ in 0..mesh.n_elements() {
        writeln!(out, "{cell_type}")?;
    }
    writeln!(out, "POINT_DATA {}", mesh.n_vertices())?;
    for (name, f) in [("theta", true), ("u", false)] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for &val in u {
            let v = if f { model.theta(val) } else { val };
            writeln!(out, "{}", format_real(v))?;
        }
    }
    Ok(())
}

pub fn write_vtk_file(path: &Path, mesh: &Mesh, model: &SoilModel, u: &[f64], time: f64) -> io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_vtk(&mut f, mesh, model, u, time)?;
    f.flush()
}
