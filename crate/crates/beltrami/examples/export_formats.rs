//! Mesh and matrix file formats: OFF round trip, legacy VTK with cell data,
//! and MatrixMarket export of the stiffness matrix.
//!
//! ```bash
//! cargo run --release --example export_formats
//! ```

use std::sync::Arc;

use beltrami::fem::assemble_stiffness;
use beltrami::io;
use beltrami::mesh::build_initial_mesh;
use beltrami::surface::Surface;

fn main() -> beltrami::Result<()> {
    let mesh = build_initial_mesh(Arc::new(Surface::sphere(1.0)), 0.5)?;
    let dir = std::path::Path::new("target/export_example");
    std::fs::create_dir_all(dir)?;

    // OFF round trip is lossless
    let off = dir.join("sphere.off");
    io::write_off(&off, &mesh)?;
    let (verts, tris) = io::read_off(&off)?;
    assert_eq!(verts, mesh.vertices);
    assert_eq!(tris, mesh.triangles);
    println!("OFF round trip: {} vertices, {} triangles", verts.len(), tris.len());

    // VTK with per-triangle fields
    let mut kappa = Vec::new();
    let mut h = Vec::new();
    for t in 0..mesh.triangle_count() {
        let g = mesh.triangle_geometry(t)?;
        kappa.push(g.kappa_t);
        h.push(g.h_t);
    }
    io::write_vtk(
        &dir.join("sphere.vtk"),
        &mesh,
        &[("kappa_T", kappa.as_slice()), ("h_T", h.as_slice())],
    )?;

    // stiffness matrix in MatrixMarket coordinate format
    let matrix = assemble_stiffness(&mesh)?;
    io::write_matrix_market(&dir.join("stiffness.mtx"), &matrix)?;
    println!(
        "stiffness: {} dofs, {} nonzeros, symmetry defect {:.2e}",
        matrix.n,
        matrix.nnz(),
        matrix.symmetry_defect()
    );
    println!("wrote {}", dir.display());
    Ok(())
}
