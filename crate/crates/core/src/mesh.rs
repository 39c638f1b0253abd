//! Mesh and table export of reconstructed solutions: Wavefront OBJ with
//! grid-quad faces for 3-dimensional targets, and a flat CSV with node
//! coordinates, image coordinates, and per-node diagnostics.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::realize::Realization;
use crate::solver::ImmersionSolution;

/// Write the base map as an OBJ surface mesh (grid dim 2, target dim 3).
pub fn export_obj(path: &Path, sol: &ImmersionSolution) -> Result<()> {
    if sol.grid.dim() != 2 {
        return Err(Error::ShapeError("OBJ export needs a 2-dimensional chart".into()));
    }
    if sol.point_dim != 3 {
        return Err(Error::ShapeError(format!(
            "OBJ export needs 3 target coordinates, solution has {}",
            sol.point_dim
        )));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# framefield reconstructed immersion")?;
    let (s0, s1) = (sol.grid.samples()[0], sol.grid.samples()[1]);
    for p in &sol.points {
        writeln!(f, "v {:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    for i in 0..s0 - 1 {
        for j in 0..s1 - 1 {
            // 1-based OBJ indices, row-major with the last axis fastest
            let a = i * s1 + j + 1;
            let b = (i + 1) * s1 + j + 1;
            let c = (i + 1) * s1 + j + 2;
            let d = i * s1 + j + 2;
            writeln!(f, "f {a} {b} {c} {d}")?;
        }
    }
    Ok(())
}

/// Write node coordinates, image coordinates, and the per-node structural
/// residual as CSV.
pub fn export_csv(path: &Path, sol: &ImmersionSolution, realization: &dyn Realization) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n = sol.grid.dim();
    let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    header.extend((0..sol.point_dim).map(|i| format!("f{i}")));
    header.push("structure_residual".into());
    writeln!(f, "{}", header.join(","))?;
    for idx in 0..sol.grid.node_count() {
        let x = sol.grid.node(&sol.grid.multi_of(idx));
        let mut row: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
        row.extend(sol.points[idx].iter().map(|v| format!("{v:.17e}")));
        row.push(format!("{:.17e}", realization.structural_residual(&sol.states[idx])));
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}
