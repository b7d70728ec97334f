//! File formats: OFF and legacy ASCII VTK meshes, CSV tables, MatrixMarket
//! matrices, and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so output
//! is lossless and byte-stable for identical inputs.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::fem::CsrMatrix;
use crate::mesh::SurfaceMesh;

/// ASCII OFF export.
pub fn off_string(vertices: &[Point3<f64>], triangles: &[[usize; 3]]) -> String {
    let mut s = String::new();
    s.push_str("OFF\n");
    let _ = writeln!(s, "{} {} 0", vertices.len(), triangles.len());
    for v in vertices {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    for t in triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn write_off(path: &Path, mesh: &SurfaceMesh) -> Result<()> {
    std::fs::write(path, off_string(&mesh.vertices, &mesh.triangles))?;
    Ok(())
}

/// ASCII OFF import: vertex positions and triangles.
pub fn read_off(path: &Path) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>)> {
    let text = std::fs::read_to_string(path)?;
    parse_off(&text)
}

pub fn parse_off(text: &str) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>)> {
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split_whitespace());
    let magic = tokens.next().ok_or_else(|| Error::Invalid("empty OFF file".into()))?;
    if magic != "OFF" {
        return Err(Error::Invalid(format!("expected OFF header, got `{magic}`")));
    }
    let mut next_usize = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Invalid(format!("OFF truncated at {what}")))?
            .parse()
            .map_err(|_| Error::Invalid(format!("OFF: bad integer at {what}")))
    };
    let nv = next_usize("vertex count")?;
    let nf = next_usize("face count")?;
    let _ne = next_usize("edge count")?;
    let mut rest = text.split_whitespace().skip(4);
    let mut next_f64 = |what: &str| -> Result<f64> {
        rest.next()
            .ok_or_else(|| Error::Invalid(format!("OFF truncated at {what}")))?
            .parse()
            .map_err(|_| Error::Invalid(format!("OFF: bad number at {what}")))
    };
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = next_f64("vertex x")?;
        let y = next_f64("vertex y")?;
        let z = next_f64("vertex z")?;
        vertices.push(Point3::new(x, y, z));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let arity = next_f64("face arity")? as usize;
        if arity != 3 {
            return Err(Error::Invalid(format!("OFF: only triangles supported, got {arity}-gon")));
        }
        let a = next_f64("face index")? as usize;
        let b = next_f64("face index")? as usize;
        let c = next_f64("face index")? as usize;
        triangles.push([a, b, c]);
    }
    Ok((vertices, triangles))
}

/// Legacy ASCII VTK POLYDATA with optional per-triangle scalar fields.
pub fn vtk_string(mesh: &SurfaceMesh, cell_fields: &[(&str, &[f64])]) -> Result<String> {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("surface mesh\n");
    s.push_str("ASCII\n");
    s.push_str("DATASET POLYDATA\n");
    let _ = writeln!(s, "POINTS {} double", mesh.vertex_count());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    let nt = mesh.triangle_count();
    let _ = writeln!(s, "POLYGONS {} {}", nt, 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    if !cell_fields.is_empty() {
        let _ = writeln!(s, "CELL_DATA {nt}");
        for (name, data) in cell_fields {
            if data.len() != nt {
                return Err(Error::Invalid(format!(
                    "field {name} has {} values for {nt} cells",
                    data.len()
                )));
            }
            let _ = writeln!(s, "SCALARS {name} double 1");
            s.push_str("LOOKUP_TABLE default\n");
            for v in *data {
                let _ = writeln!(s, "{v}");
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &SurfaceMesh, cell_fields: &[(&str, &[f64])]) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, cell_fields)?)?;
    Ok(())
}

/// Point-data variant: per-vertex scalars (the solution field).
pub fn vtk_string_with_point_data(
    mesh: &SurfaceMesh,
    point_fields: &[(&str, &[f64])],
    cell_fields: &[(&str, &[f64])],
) -> Result<String> {
    let mut s = vtk_string(mesh, cell_fields)?;
    if !point_fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.vertex_count());
        for (name, data) in point_fields {
            if data.len() != mesh.vertex_count() {
                return Err(Error::Invalid(format!(
                    "field {name} has {} values for {} points",
                    data.len(),
                    mesh.vertex_count()
                )));
            }
            let _ = writeln!(s, "SCALARS {name} double 1");
            s.push_str("LOOKUP_TABLE default\n");
            for v in *data {
                let _ = writeln!(s, "{v}");
            }
        }
    }
    Ok(s)
}

/// Symmetric MatrixMarket coordinate export (lower triangle, 1-based).
pub fn matrix_market_string(m: &CsrMatrix) -> String {
    let mut entries = Vec::new();
    for i in 0..m.n {
        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
            let j = m.col_idx[k] as usize;
            if j <= i {
                entries.push((i + 1, j + 1, m.values[k]));
            }
        }
    }
    let mut s = String::new();
    s.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(s, "{} {} {}", m.n, m.n, entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{i} {j} {v}");
    }
    s
}

pub fn write_matrix_market(path: &Path, m: &CsrMatrix) -> Result<()> {
    std::fs::write(path, matrix_market_string(m))?;
    Ok(())
}

/// Run manifest: config echo, code version, and computed indicators.
pub fn manifest_string(
    config: &crate::config::ConfigMap,
    indicators: &[(String, String)],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "beltrami {}", env!("CARGO_PKG_VERSION"));
    s.push_str("\n[config]\n");
    for (k, v) in config.entries() {
        let _ = writeln!(s, "{k} = {v}");
    }
    s.push_str("\n[results]\n");
    for (k, v) in indicators {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}
