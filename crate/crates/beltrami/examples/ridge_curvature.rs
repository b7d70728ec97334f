//! Reproduce the two region curvature maxima of the ridge surface by dense
//! sampling of the shape operator, and derive the graded-mesh transition
//! width from them.
//!
//! ```bash
//! cargo run --release --example ridge_curvature
//! ```

use beltrami::grading::{transition_width, GradingConfig};
use beltrami::surface::Surface;

fn main() -> beltrami::Result<()> {
    let surface = Surface::ridge();
    let start = std::time::Instant::now();
    let (kappa1, kappa2) = surface.region_curvature_maxima(2048)?;
    println!("sampled 2048x2048 parameter grids in {:.2?}", start.elapsed());
    println!("kappa_1 (inside the ellipse)  = {kappa1:.3}");
    println!("kappa_2 (rest of the disk)    = {kappa2:.3}");
    println!("contrast kappa_1 / kappa_2    = {:.3}", kappa1 / kappa2);

    for cp in [0.5, 1.0, 2.0] {
        let cfg = GradingConfig::new(cp, kappa1, kappa2, 0.1);
        let (d1, h1) = transition_width(&cfg);
        println!("c_p = {cp}: transition width d1 = {d1:.6}, near-region size h1 = {h1:.6}");
    }
    Ok(())
}
