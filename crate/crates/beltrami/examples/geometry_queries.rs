//! Pointwise differential geometry on the built-in surfaces: closest-point
//! projection, signed distance, shape operator, and the identities they
//! satisfy.
//!
//! ```bash
//! cargo run --release --example geometry_queries
//! ```

use beltrami::surface::{tangent_basis, Surface};
use nalgebra::{Matrix3, Point3};

fn main() -> beltrami::Result<()> {
    // Radial projection onto the unit sphere
    let sphere = Surface::sphere(1.0);
    let frame = sphere.closest_point(&Point3::new(2.0, 0.0, 0.0))?;
    println!("sphere: a(2,0,0) = {:?}, d = {}", frame.point, frame.signed_distance);

    // Reconstruction x = a + d nu and idempotence a(a(x)) = a(x)
    let x = Point3::new(0.4, -1.1, 0.8);
    let f = sphere.closest_point(&x)?;
    let rebuilt = f.point + f.normal * f.signed_distance;
    println!("sphere: |x - (a + d nu)| = {:.3e}", (rebuilt - x).norm());
    let f2 = sphere.closest_point(&f.point)?;
    println!("sphere: |a(a(x)) - a(x)| = {:.3e}", (f2.point - f.point).norm());

    // The shape operator annihilates the normal and commutes with the
    // tangential projection
    for (name, surface, probe) in [
        ("sphere", Surface::sphere(1.0), None),
        ("torus", Surface::torus(1.0, 0.4), Some([0.7, 1.2])),
        ("ridge", Surface::ridge(), Some([0.25, -0.3])),
    ] {
        let frame = match probe {
            Some(params) => surface.frame_at(params),
            None => surface.closest_point(&Point3::new(0.3, 0.4, 0.87))?,
        };
        let h = &frame.shape;
        let p = frame.tangential_projection();
        println!(
            "{name}: |H nu| = {:.2e}, |PH - H| = {:.2e}, spectral radius = {:.4}",
            (h * frame.normal).norm(),
            (p * h - *h).norm(),
            frame.curvature(),
        );
    }

    // Principal curvatures on the ridge crest via the tangent-plane block
    let ridge = Surface::ridge();
    let crest = ridge.frame_at([0.0, 0.0]);
    let (t1, t2) = tangent_basis(&crest.normal);
    let block = [
        (t1.transpose() * crest.shape * t1)[0],
        (t2.transpose() * crest.shape * t2)[0],
    ];
    println!("ridge crest principal curvatures ~ {:.3} and {:.3}", block[0], block[1]);

    // (I - dH)^{-1} stays tame inside the tubular neighborhood
    let d = 0.4 / crest.curvature();
    let inv = (Matrix3::identity() - crest.shape * d).try_inverse().unwrap();
    let res = crest.tangential_projection() * inv * crest.normal;
    println!("ridge: |P (I - dH)^-1 nu| = {:.2e}", res.norm());
    Ok(())
}
