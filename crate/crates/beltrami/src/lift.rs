//! Lift calculus between the polyhedral mesh `Gamma_h` and the smooth
//! surface `Gamma`.
//!
//! Every flat quadrature point `x` lifts to `a(x)` along the closest-point
//! fiber. At each lifted node this module evaluates the metric tensors of
//! the flat and lifted parameterizations, the area ratio
//! `delta_T = sqrt(det(G_Y G_X^{-1}))`, and the gradient transport matrices
//!
//! - `Q = (I - dH) P_h`, pulling tangential gradients from `Gamma` to
//!   `Gamma_h`, and
//! - `R = [I - (nu_h - nu)(nu - nu_h)^t / (nu_h . nu)] (I - dH)^{-1} P`,
//!   pushing them forward,
//!
//! so that integrals over the surface become weighted flat integrals:
//! `int_{T^l} grad eta^l . grad psi^l dA
//!  = int_T (grad eta R) . (grad psi R) delta_T dA_h`.
//!
//! The standing smallness assumption is enforced pointwise: the spectral
//! radius of `d H` must stay below 1/2 at every node, otherwise the lift is
//! rejected as a hard error.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;
use crate::quadrature::{hat_values, QuadNode, DEGREE4};
use crate::surface::PointFrame;

/// Everything the lift needs at one quadrature node of one triangle.
#[derive(Debug, Clone)]
pub struct LiftedNode {
    pub reference: [f64; 2],
    /// Reference weight (the six weights sum to 1/2).
    pub weight: f64,
    pub flat_point: Point3<f64>,
    pub frame: PointFrame,
    pub delta: f64,
    pub q_matrix: Matrix3<f64>,
    pub r_matrix: Matrix3<f64>,
}

/// Per-triangle lift data: flat geometry, hat-function tangential gradients,
/// and the six lifted quadrature nodes.
#[derive(Debug, Clone)]
pub struct TriangleLift {
    pub triangle: usize,
    pub area: f64,
    pub nu_h: Vector3<f64>,
    pub grad_x: Matrix3x2<f64>,
    pub hat_gradients: [Vector3<f64>; 3],
    pub nodes: Vec<LiftedNode>,
}

/// The `H` field at an off-surface node: the Hessian of the signed distance
/// at `x`, `H(x) = H(a) (I + d H(a))^{-1}`, which coincides with the shape
/// operator on the surface and makes `grad a(x) = P - d H(x)` exact. Fails
/// when the node sits at the medial axis (`1 + d kappa_i = 0`).
pub fn distance_hessian(triangle: usize, frame: &PointFrame) -> Result<Matrix3<f64>> {
    let d = frame.signed_distance;
    let m = Matrix3::identity() + frame.shape * d;
    let m_inv = m.try_inverse().ok_or(Error::SuffViolated {
        triangle,
        value: f64::INFINITY,
        bound: 0.5,
    })?;
    let h = frame.shape * m_inv;
    Ok(0.5 * (h + h.transpose()))
}

/// Metric tensors of the flat map `X` and the lifted map `Y = a . X` at a
/// node: `G_X = (grad X)^t grad X` and `G_Y = (grad Y)^t grad Y` with
/// `grad Y = (P - d H) grad X`.
pub fn metric_tensors(
    triangle: usize,
    grad_x: &Matrix3x2<f64>,
    frame: &PointFrame,
) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    let g_x = grad_x.transpose() * grad_x;
    if g_x.determinant() <= 0.0 {
        return Err(Error::DegenerateTriangle { triangle, det: g_x.determinant() });
    }
    let p = frame.tangential_projection();
    let h = distance_hessian(triangle, frame)?;
    let grad_y = (p - h * frame.signed_distance) * grad_x;
    let g_y = grad_y.transpose() * grad_y;
    Ok((g_x, g_y))
}

/// Area ratio `delta_T = sqrt(det(G_Y G_X^{-1}))` at a node.
pub fn area_ratio(triangle: usize, grad_x: &Matrix3x2<f64>, frame: &PointFrame) -> Result<f64> {
    let (g_x, g_y) = metric_tensors(triangle, grad_x, frame)?;
    let det_y = g_y.determinant();
    if det_y <= 0.0 {
        return Err(Error::DegenerateTriangle { triangle, det: det_y });
    }
    Ok((det_y / g_x.determinant()).sqrt())
}

/// The transport matrices `(Q, R)` at a node. Rejects nodes where the facet
/// normal opposes the surface normal or where `rho(dH) > 1/2`.
pub fn lift_matrices(
    triangle: usize,
    nu_h: &Vector3<f64>,
    frame: &PointFrame,
) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    let nu = frame.normal;
    let dot = nu_h.dot(&nu);
    if dot <= 0.0 {
        return Err(Error::NormalFlip { triangle, dot });
    }
    let h = distance_hessian(triangle, frame)?;
    let hd = h * frame.signed_distance;
    let dh_radius = {
        // dH annihilates nu, so its spectral radius lives on the tangent plane
        let (t1, t2) = crate::surface::tangent_basis(&nu);
        let a = (t1.transpose() * hd * t1)[0];
        let b = (t1.transpose() * hd * t2)[0];
        let c = (t2.transpose() * hd * t2)[0];
        let mean = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        (mean + disc).abs().max((mean - disc).abs())
    };
    if dh_radius > 0.5 {
        return Err(Error::SuffViolated { triangle, value: dh_radius, bound: 0.5 });
    }
    let p = frame.tangential_projection();
    let p_h = Matrix3::identity() - nu_h * nu_h.transpose();
    let a = Matrix3::identity() - hd;
    let q = a * p_h;
    let a_inv = a.try_inverse().ok_or(Error::SuffViolated {
        triangle,
        value: dh_radius,
        bound: 0.5,
    })?;
    let skew = Matrix3::identity() - (nu_h - nu) * (nu - nu_h).transpose() / dot;
    let r = skew * a_inv * p;
    Ok((q, r))
}

impl TriangleLift {
    /// Lift the degree-4 quadrature rule on one triangle.
    pub fn compute(mesh: &SurfaceMesh, t: usize) -> Result<TriangleLift> {
        Self::compute_with_rule(mesh, t, &DEGREE4)
    }

    pub fn compute_with_rule(
        mesh: &SurfaceMesh,
        t: usize,
        rule: &[QuadNode],
    ) -> Result<TriangleLift> {
        let [p0, p1, p2] = mesh.triangle_vertices(t);
        let raw = (p1 - p0).cross(&(p2 - p0));
        let area = 0.5 * raw.norm();
        if area <= 0.0 {
            return Err(Error::DegenerateTriangle { triangle: t, det: area });
        }
        let nu_h = raw / (2.0 * area);
        let grad_x = Matrix3x2::from_columns(&[p1 - p0, p2 - p0]);
        let hat_gradients = [
            nu_h.cross(&(p2 - p1)) / (2.0 * area),
            nu_h.cross(&(p0 - p2)) / (2.0 * area),
            nu_h.cross(&(p1 - p0)) / (2.0 * area),
        ];
        let mut nodes = Vec::with_capacity(rule.len());
        for qn in rule {
            let x = p0 + (p1 - p0) * qn.theta[0] + (p2 - p0) * qn.theta[1];
            let frame = mesh.lift_point(&x, t)?;
            let delta = area_ratio(t, &grad_x, &frame)?;
            let (q_matrix, r_matrix) = lift_matrices(t, &nu_h, &frame)?;
            nodes.push(LiftedNode {
                reference: qn.theta,
                weight: qn.weight,
                flat_point: x,
                frame,
                delta,
                q_matrix,
                r_matrix,
            });
        }
        Ok(TriangleLift { triangle: t, area, nu_h, grad_x, hat_gradients, nodes })
    }

    /// Value of the P1 function with the triangle's three coefficients at a
    /// reference point.
    pub fn value_at(&self, coeffs: [f64; 3], theta: [f64; 2]) -> f64 {
        let h = hat_values(theta);
        coeffs[0] * h[0] + coeffs[1] * h[1] + coeffs[2] * h[2]
    }

    /// Constant flat tangential gradient of the P1 function on this triangle.
    pub fn flat_gradient(&self, coeffs: [f64; 3]) -> Vector3<f64> {
        self.hat_gradients[0] * coeffs[0]
            + self.hat_gradients[1] * coeffs[1]
            + self.hat_gradients[2] * coeffs[2]
    }
}

fn tri_coeffs(mesh: &SurfaceMesh, coeffs: &[f64], t: usize) -> [f64; 3] {
    let [a, b, c] = mesh.triangles[t];
    [coeffs[a], coeffs[b], coeffs[c]]
}

/// `||u - u_h^l||_{L^2(Gamma)}` by lifted quadrature.
pub fn lifted_l2_error(
    mesh: &SurfaceMesh,
    coeffs: &[f64],
    exact: impl Fn(&Point3<f64>) -> f64,
) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let lift = TriangleLift::compute(mesh, t)?;
        let c = tri_coeffs(mesh, coeffs, t);
        for node in &lift.nodes {
            let diff = exact(&node.frame.point) - lift.value_at(c, node.reference);
            acc += 2.0 * lift.area * node.weight * diff * diff * node.delta;
        }
    }
    Ok(acc.sqrt())
}

/// `||grad_Gamma (u - u_h^l)||_{L^2(Gamma)}`: the exact tangential gradient
/// against the pushed-forward discrete gradient `(grad_{Gamma_h} u_h) R`.
pub fn lifted_h1_error(
    mesh: &SurfaceMesh,
    coeffs: &[f64],
    exact_grad: impl Fn(&Point3<f64>) -> Vector3<f64>,
) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let lift = TriangleLift::compute(mesh, t)?;
        let g_flat = lift.flat_gradient(tri_coeffs(mesh, coeffs, t));
        for node in &lift.nodes {
            let lifted = node.r_matrix.transpose() * g_flat;
            let diff = exact_grad(&node.frame.point) - lifted;
            acc += 2.0 * lift.area * node.weight * diff.norm_squared() * node.delta;
        }
    }
    Ok(acc.sqrt())
}

/// `||grad_Gamma eta^l||_{L^2(Gamma)}` of a FEM vector, by the R-route.
pub fn lifted_h1_seminorm(mesh: &SurfaceMesh, coeffs: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let lift = TriangleLift::compute(mesh, t)?;
        let g_flat = lift.flat_gradient(tri_coeffs(mesh, coeffs, t));
        for node in &lift.nodes {
            let lifted = node.r_matrix.transpose() * g_flat;
            acc += 2.0 * lift.area * node.weight * lifted.norm_squared() * node.delta;
        }
    }
    Ok(acc.sqrt())
}

/// `||grad_{Gamma_h} eta||_{L^2(Gamma_h)}` of a FEM vector (flat route;
/// exact for P1 since the gradient is constant per triangle).
pub fn flat_h1_seminorm(mesh: &SurfaceMesh, coeffs: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let lift = TriangleLift::compute(mesh, t)?;
        let g = lift.flat_gradient(tri_coeffs(mesh, coeffs, t));
        acc += lift.area * g.norm_squared();
    }
    Ok(acc.sqrt())
}

/// `||f||_{L^2(Gamma)}` of a pointwise field, by lifted quadrature.
pub fn lifted_l2_norm_of(mesh: &SurfaceMesh, f: impl Fn(&Point3<f64>) -> f64) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let lift = TriangleLift::compute(mesh, t)?;
        for node in &lift.nodes {
            let v = f(&node.frame.point);
            acc += 2.0 * lift.area * node.weight * v * v * node.delta;
        }
    }
    Ok(acc.sqrt())
}

/// `int_Gamma f dA` by lifted quadrature.
pub fn lifted_integral_of(mesh: &SurfaceMesh, f: impl Fn(&Point3<f64>) -> f64) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let lift = TriangleLift::compute(mesh, t)?;
        for node in &lift.nodes {
            acc += 2.0 * lift.area * node.weight * f(&node.frame.point) * node.delta;
        }
    }
    Ok(acc)
}

/// `|Gamma| = sum_T int_T delta_T dA_h`.
pub fn lifted_area(mesh: &SurfaceMesh) -> Result<f64> {
    lifted_integral_of(mesh, |_| 1.0)
}

/// The global geometric indicators
/// `Psi_h = max_T kappa_T^2 h_T^2` and `Lambda_h = max_T h_T^3 gamma_T kappa_T`.
pub fn global_indicators(mesh: &SurfaceMesh) -> Result<(f64, f64)> {
    let mut psi = 0.0f64;
    let mut lambda = 0.0f64;
    for t in 0..mesh.triangle_count() {
        let g = mesh.triangle_geometry(t)?;
        psi = psi.max(g.kappa_t * g.kappa_t * g.h_t * g.h_t);
        lambda = lambda.max(g.h_t.powi(3) * g.gamma_t * g.kappa_t);
    }
    Ok((psi, lambda))
}

/// Flat bilinear form `int_{Gamma_h} grad_{Gamma_h} v . grad_{Gamma_h} z dA_h`.
pub fn flat_bilinear(mesh: &SurfaceMesh, v: &[f64], z: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let lift = TriangleLift::compute(mesh, t)?;
        let gv = lift.flat_gradient(tri_coeffs(mesh, v, t));
        let gz = lift.flat_gradient(tri_coeffs(mesh, z, t));
        acc += lift.area * gv.dot(&gz);
    }
    Ok(acc)
}

/// Lifted bilinear form `int_Gamma grad_Gamma v^l . grad_Gamma z^l dA`
/// evaluated through the R-matrices and `delta_T`.
pub fn lifted_bilinear(mesh: &SurfaceMesh, v: &[f64], z: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        let lift = TriangleLift::compute(mesh, t)?;
        let gv = lift.flat_gradient(tri_coeffs(mesh, v, t));
        let gz = lift.flat_gradient(tri_coeffs(mesh, z, t));
        for node in &lift.nodes {
            let lv = node.r_matrix.transpose() * gv;
            let lz = node.r_matrix.transpose() * gz;
            acc += 2.0 * lift.area * node.weight * lv.dot(&lz) * node.delta;
        }
    }
    Ok(acc)
}

/// Absolute gap between the flat and lifted bilinear forms; scales with
/// `Psi_h` for smooth data.
pub fn inconsistency_gap(mesh: &SurfaceMesh, v: &[f64], z: &[f64]) -> Result<f64> {
    Ok((flat_bilinear(mesh, v, z)? - lifted_bilinear(mesh, v, z)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_initial_mesh, icosahedron, structured_rect};
    use crate::surface::Surface;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn plane_mesh() -> SurfaceMesh {
        let s = Arc::new(Surface::plane(0.0, (0.0, 1.0), (0.0, 1.0)));
        structured_rect(s, 3, 3).unwrap()
    }

    #[test]
    fn plane_metrics_coincide() {
        let mesh = plane_mesh();
        for t in 0..mesh.triangle_count() {
            let lift = TriangleLift::compute(&mesh, t).unwrap();
            for node in &lift.nodes {
                let (gx, gy) = metric_tensors(t, &lift.grad_x, &node.frame).unwrap();
                assert_relative_eq!(gx, gy, epsilon = 1e-13);
                assert_relative_eq!(node.delta, 1.0, epsilon = 1e-13);
                let p = node.frame.tangential_projection();
                assert_relative_eq!(node.q_matrix, p, epsilon = 1e-12);
                assert_relative_eq!(node.r_matrix, p, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sphere_chord_delta_exceeds_one() {
        let mesh = icosahedron(Arc::new(Surface::sphere(1.0)));
        let lift = TriangleLift::compute(&mesh, 0).unwrap();
        for node in &lift.nodes {
            assert!(node.delta > 1.0, "flat chord triangle lifts to a larger patch");
        }
    }

    #[test]
    fn metric_matches_finite_difference_of_composed_map() {
        let mesh = build_initial_mesh(Arc::new(Surface::sphere(1.0)), 0.7).unwrap();
        let t = 5;
        let lift = TriangleLift::compute(&mesh, t).unwrap();
        let [p0, p1, p2] = mesh.triangle_vertices(t);
        let surf = mesh.surface.clone();
        let y = |t1: f64, t2: f64| {
            let x = p0 + (p1 - p0) * t1 + (p2 - p0) * t2;
            surf.closest_point(&x).unwrap().point
        };
        let h = 1e-6;
        for node in &lift.nodes {
            let [t1, t2] = node.reference;
            let d1 = (y(t1 + h, t2) - y(t1 - h, t2)) / (2.0 * h);
            let d2 = (y(t1, t2 + h) - y(t1, t2 - h)) / (2.0 * h);
            let g_fd = Matrix2::new(d1.dot(&d1), d1.dot(&d2), d1.dot(&d2), d2.dot(&d2));
            let (_, gy) = metric_tensors(t, &lift.grad_x, &node.frame).unwrap();
            assert_relative_eq!(gy, g_fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn sphere_area_identity() {
        let mesh = build_initial_mesh(Arc::new(Surface::sphere(1.0)), 0.15).unwrap();
        let area = lifted_area(&mesh).unwrap();
        assert!((area - 4.0 * std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn round_trip_and_tangency_at_every_node() {
        for surface in [Surface::sphere(1.0), Surface::torus(1.0, 0.4)] {
            let mesh = build_initial_mesh(Arc::new(surface), 0.5).unwrap();
            for t in 0..mesh.triangle_count() {
                let lift = TriangleLift::compute(&mesh, t).unwrap();
                for node in &lift.nodes {
                    for g in [lift.hat_gradients[0], lift.hat_gradients[1]] {
                        // (g R) Q = g for flat-tangential g
                        let gr = node.r_matrix.transpose() * g;
                        let back = node.q_matrix.transpose() * gr;
                        assert!((back - g).norm() <= 1e-8 * (1.0 + g.norm()));
                        // (g R) annihilates the surface normal
                        assert!(gr.dot(&node.frame.normal).abs() <= 1e-8 * (1.0 + g.norm()));
                    }
                }
            }
        }
    }

    #[test]
    fn lift_gradient_matches_directional_finite_difference() {
        // For a hat function eta on a fine sphere mesh, (grad eta) R equals
        // the intrinsic derivative of the lifted function along the surface.
        let mesh = build_initial_mesh(Arc::new(Surface::sphere(1.0)), 0.25).unwrap();
        let t = 17;
        let lift = TriangleLift::compute(&mesh, t).unwrap();
        let g_flat = lift.flat_gradient([1.0, 0.0, 0.0]);
        let node = &lift.nodes[0];
        let lifted = node.r_matrix.transpose() * g_flat;
        // directional derivative of eta^l along the surface: evaluate eta at
        // the flat preimage of nearby surface points, walking back along the
        // closest-point fiber (the direction of the surface normal).
        let [p0, p1, p2] = mesh.triangle_vertices(t);
        let e1 = p1 - p0;
        let e2 = p2 - p0;
        let nu_h = lift.nu_h;
        let eta_lifted = |q: Point3<f64>| {
            let nu = q.coords.normalize(); // unit sphere
            let tau = (p0 - q).dot(&nu_h) / nu.dot(&nu_h);
            let x = q + nu * tau;
            let m = Matrix3::from_columns(&[e1, e2, nu_h]);
            let s = m.try_inverse().unwrap() * (x - p0);
            1.0 - s.x - s.y
        };
        let (t1, _) = crate::surface::tangent_basis(&node.frame.normal);
        let h = 1e-5;
        let surf = &mesh.surface;
        let pp = surf.closest_point(&(node.frame.point + t1 * h)).unwrap().point;
        let pm = surf.closest_point(&(node.frame.point - t1 * h)).unwrap().point;
        let fd = (eta_lifted(pp) - eta_lifted(pm)) / (2.0 * h);
        assert_relative_eq!(lifted.dot(&t1), fd, max_relative = 1e-4, epsilon = 1e-5);
    }

    #[test]
    fn lifted_errors_vanish_for_exact_fits() {
        let mesh = build_initial_mesh(Arc::new(Surface::sphere(1.0)), 0.5).unwrap();
        let ones = vec![1.0; mesh.vertex_count()];
        let e = lifted_l2_error(&mesh, &ones, |_| 1.0).unwrap();
        assert!(e <= 1e-12);
        let eh = lifted_h1_error(&mesh, &ones, |_| Vector3::zeros()).unwrap();
        assert!(eh <= 1e-12);
    }

    #[test]
    fn h1_seminorm_routes_agree_on_fine_mesh() {
        let mesh = build_initial_mesh(Arc::new(Surface::sphere(1.0)), 0.2).unwrap();
        let coeffs = mesh.interpolate(|p| p.x * p.y * p.z);
        let lifted = lifted_h1_seminorm(&mesh, &coeffs).unwrap();
        let flat = flat_h1_seminorm(&mesh, &coeffs).unwrap();
        assert_relative_eq!(lifted, flat, max_relative = 0.02);
    }

    #[test]
    fn indicators_plane_zero_sphere_scaled() {
        let plane = plane_mesh();
        let (psi, lambda) = global_indicators(&plane).unwrap();
        assert!(psi.abs() < 1e-12 && lambda.abs() < 1e-12);

        let mesh = build_initial_mesh(Arc::new(Surface::sphere(1.0)), 0.5).unwrap();
        let h = mesh.max_h();
        let (psi, _) = global_indicators(&mesh).unwrap();
        assert!(psi >= 0.5 * h * h && psi <= 1.5 * h * h, "psi = {psi}, h^2 = {}", h * h);

        let finer = mesh.refine_uniform().unwrap();
        let (psi2, _) = global_indicators(&finer).unwrap();
        let ratio = psi2 / psi;
        assert!((0.2..=0.3).contains(&ratio), "psi quartering ratio {ratio}");
    }

    #[test]
    fn inconsistency_zero_cases() {
        let plane = plane_mesh();
        let v = plane.interpolate(|p| p.x + 2.0 * p.y);
        let z = plane.interpolate(|p| p.x * p.x - p.y);
        assert!(inconsistency_gap(&plane, &v, &z).unwrap() < 1e-13);

        let mesh = build_initial_mesh(Arc::new(Surface::sphere(1.0)), 0.5).unwrap();
        let c = vec![3.25; mesh.vertex_count()];
        let z = mesh.interpolate(|p| p.x);
        assert!(inconsistency_gap(&mesh, &c, &z).unwrap() < 1e-13);
    }
}
