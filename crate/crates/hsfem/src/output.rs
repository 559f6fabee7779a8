//! File output: VTK legacy ASCII unstructured grids, CSV field and series
//! tables, and a coordinate-format matrix dump. Every writer goes through a
//! temp-file-plus-rename so aborted runs never leave truncated artifacts.
//! Floating-point columns carry 17 significant digits for exact round trips.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::FieldFormat;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::fespace::Field;
use crate::mesh::Mesh;
use crate::sparse::SparseOperator;
use crate::stepper::SimState;

fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".to_string(),
    });
    let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.into_inner().map_err(|e| e.into_error())?.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Mesh-only dump: POINTS plus CELLS of type 5 (triangles).
pub fn write_mesh_vtk(mesh: &Mesh, path: &Path) -> Result<()> {
    write_atomic(path, |w| {
        write_vtk_grid(w, mesh, "hsfem mesh")?;
        Ok(())
    })
}

fn write_vtk_grid(w: &mut impl Write, mesh: &Mesh, title: &str) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{} {} 0", fmt(p[0]), fmt(p[1]))?;
    }
    writeln!(w, "CELLS {} {}", mesh.num_elements(), 4 * mesh.num_elements())?;
    for t in mesh.elements() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.num_elements())?;
    for _ in 0..mesh.num_elements() {
        writeln!(w, "5")?;
    }
    Ok(())
}

fn write_scalars(w: &mut impl Write, name: &str, values: &[f64]) -> std::io::Result<()> {
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(w, "{}", fmt(*v))?;
    }
    Ok(())
}

/// Field dump with point scalars `density`, `pressure`, and
/// `density_minus_pressure`.
pub fn write_field_vtk(mesh: &Mesh, state: &SimState, path: &Path) -> Result<()> {
    state.n.check_mesh(mesh)?;
    write_atomic(path, |w| {
        write_vtk_grid(w, mesh, &format!("hsfem state t={}", state.t))?;
        writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
        write_scalars(w, "density", state.n.values())?;
        write_scalars(w, "pressure", state.p.values())?;
        let diff: Vec<f64> = state
            .n
            .values()
            .iter()
            .zip(state.p.values())
            .map(|(n, p)| n - p)
            .collect();
        write_scalars(w, "density_minus_pressure", &diff)?;
        Ok(())
    })
}

/// Field dump as `x,y,density,pressure` rows, one per node.
pub fn write_field_csv(mesh: &Mesh, state: &SimState, path: &Path) -> Result<()> {
    state.n.check_mesh(mesh)?;
    write_atomic(path, |w| {
        writeln!(w, "x,y,density,pressure")?;
        for (a, p) in mesh.nodes().iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt(p[0]),
                fmt(p[1]),
                fmt(state.n.values()[a]),
                fmt(state.p.values()[a])
            )?;
        }
        Ok(())
    })
}

/// Dispatch on the configured format; `stem` is the path without extension.
pub fn write_field(
    mesh: &Mesh,
    state: &SimState,
    stem: &Path,
    format: FieldFormat,
) -> Result<()> {
    match format {
        FieldFormat::Vtk => write_field_vtk(mesh, state, &stem.with_extension("vtk")),
        FieldFormat::Csv => write_field_csv(mesh, state, &stem.with_extension("csv")),
        FieldFormat::Both => {
            write_field_vtk(mesh, state, &stem.with_extension("vtk"))?;
            write_field_csv(mesh, state, &stem.with_extension("csv"))
        }
    }
}

/// Re-read the density column of a field CSV (round-trip checks).
pub fn read_field_csv_density(mesh: &Mesh, path: &Path) -> Result<Field> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "field CSV row {i} has {} columns, expected 4",
                cols.len()
            )));
        }
        let v: f64 = cols[2]
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad density on row {i}")))?;
        values.push(v);
    }
    Field::from_values(mesh, values)
}

pub const SERIES_HEADER: &str =
    "t,min_n,max_n,min_dtn,mass,mass_balance_residual,energy_lhs,energy_rhs,grad_p,complementarity,snaps";

/// Per-step diagnostics table.
pub fn write_series(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "{SERIES_HEADER}")?;
        for r in records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                fmt(r.t),
                fmt(r.min_n),
                fmt(r.max_n),
                fmt(r.min_dtn),
                fmt(r.mass),
                fmt(r.mass_balance_residual),
                fmt(r.energy_lhs),
                fmt(r.energy_rhs),
                fmt(r.grad_p_norm),
                fmt(r.complementarity),
                r.snaps
            )?;
        }
        Ok(())
    })
}

/// Coordinate text dump (`row col value` per stored entry).
pub fn write_matrix_coo(a: &SparseOperator, path: &Path) -> Result<()> {
    write_atomic(path, |w| {
        let mut res = Ok(());
        a.for_each_entry(|r, c, v| {
            if res.is_ok() {
                res = writeln!(w, "{r} {c} {}", fmt(v));
            }
        });
        res
    })
}

/// Arbitrary small text artifact (run metadata, sweep tables).
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    write_atomic(path, |w| w.write_all(content.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::fespace::Field;
    use crate::mesh::Diagonal;
    use crate::stepper::SimState;

    fn state_on(mesh: &Mesh, c: f64) -> SimState {
        let params = RunConfig::reference().model;
        SimState::new(&params, Field::constant(mesh, c), 0.0, 0).unwrap()
    }

    #[test]
    fn vtk_two_triangle_dump() {
        let mesh = Mesh::build_rect(0.0, 1.0, 0.0, 1.0, 1, 1, Diagonal::SwNe).unwrap();
        let state = state_on(&mesh, 1.0);
        let dir = std::env::temp_dir().join(format!("hsfem_vtk_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("unit.vtk");
        write_field_vtk(&mesh, &state, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("POINTS 4 double"));
        assert!(text.contains("CELLS 2 8"));
        assert!(text.lines().filter(|l| *l == "5").count() >= 2);
        assert!(text.contains("SCALARS density double 1"));
        let density_ones = text
            .lines()
            .filter(|l| l.starts_with("1.0000000000000000e0"))
            .count();
        assert!(density_ones >= 4, "expected four unit density rows");
        assert!(!dir.join("unit.vtk.tmp").exists());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mesh = Mesh::build_rect(-2.0, 2.0, -1.0, 1.0, 5, 3, Diagonal::SwNe).unwrap();
        let params = RunConfig::reference().model;
        let n = crate::fespace::nodal_interpolate(&mesh, |x, y| {
            0.1 + (x * 1.7).sin().abs() * 0.3 + y * y * 0.01
        })
        .unwrap();
        let state = SimState::new(&params, n, 0.0, 0).unwrap();
        let dir = std::env::temp_dir().join(format!("hsfem_csv_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.csv");
        write_field_csv(&mesh, &state, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), mesh.num_nodes() + 1);

        let back = read_field_csv_density(&mesh, &path).unwrap();
        for (a, b) in state.n.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empty_series_is_header_only() {
        let dir = std::env::temp_dir().join(format!("hsfem_series_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("series.csv");
        write_series(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.trim_end(), SERIES_HEADER);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn matrix_coo_dump() {
        let mesh = Mesh::build_rect(0.0, 1.0, 0.0, 1.0, 1, 1, Diagonal::SwNe).unwrap();
        let k = crate::assembly::stiffness(&mesh);
        let dir = std::env::temp_dir().join(format!("hsfem_coo_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("k.txt");
        write_matrix_coo(&k, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), k.pattern().nnz());
        assert!(text.lines().next().unwrap().starts_with("0 0 "));
        std::fs::remove_dir_all(&dir).ok();
    }
}
