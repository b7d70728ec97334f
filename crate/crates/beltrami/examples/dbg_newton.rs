use beltrami::grading::{grade, GradingConfig};
use beltrami::mesh::structured_disk;
use beltrami::surface::Surface;
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let surface = Arc::new(Surface::ridge());
    let (k1, k2) = surface.region_curvature_maxima(1024).unwrap();
    println!("kappa1={k1:.3} kappa2={k2:.3}");
    for (cp, h, rings) in [(1.0, 0.5, 10), (0.2, 0.5, 8), (0.05, 0.5, 8), (0.05, 0.5, 6), (0.02, 0.5, 6), (0.05, 0.7, 6)] {
        let t0 = Instant::now();
        let initial = structured_disk(surface.clone(), rings).unwrap();
        let mut cfg = GradingConfig::new(cp, k1, k2, h);
        cfg.include_m4 = true;
        match grade(&initial, &cfg) {
            Ok((mesh, report)) => {
                let interior = mesh.boundary_vertex.iter().filter(|b| !**b).count();
                let admissible = beltrami::experiments::lift_admissible(&mesh).is_ok();
                println!(
                    "cp={cp} h={h} rings={rings}: tris={} interior={} sweeps={} d1={:.4} h_min={:.5} admissible={} ({:.1?})",
                    mesh.triangle_count(), interior, report.sweeps, report.d1, mesh.min_h(), admissible, t0.elapsed()
                );
            }
            Err(e) => println!("cp={cp} h={h} rings={rings}: ERR {e}"),
        }
    }
}
