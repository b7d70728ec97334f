//! Analytic surface descriptors and pointwise differential geometry.
//!
//! A [`Surface`] answers the geometric queries every other module relies on:
//! closest point on the surface, signed distance, oriented unit normal, the
//! shape operator `H` (derivative of the Gauss map, a symmetric 3x3 matrix
//! with `H nu = 0`), sampled curvature bounds, and the finite-difference
//! bound on the gradient of `H`.
//!
//! Conventions: gradients of scalar fields are row vectors, normals are
//! columns, and the signed distance is positive on the side the normal
//! points into, so `x = a(x) + d(x) nu(a(x))` always reconstructs the query
//! point.

use nalgebra::{Matrix2, Matrix3, Point3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Scalar field `g(u, v)` defining a graph surface `(u, v, g(u, v))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphFn {
    /// Constant height: a plane at `z = z0`.
    Constant(f64),
    /// The high-curvature ridge `g = 1 - sqrt(u^2 + 0.05 v^2 + 2.5e-5)`.
    Ridge,
}

impl GraphFn {
    pub fn value(&self, u: f64, v: f64) -> f64 {
        match self {
            GraphFn::Constant(z0) => *z0,
            GraphFn::Ridge => 1.0 - Self::ridge_s(u, v),
        }
    }

    /// (g_u, g_v)
    pub fn gradient(&self, u: f64, v: f64) -> (f64, f64) {
        match self {
            GraphFn::Constant(_) => (0.0, 0.0),
            GraphFn::Ridge => {
                let s = Self::ridge_s(u, v);
                (-u / s, -0.05 * v / s)
            }
        }
    }

    /// (g_uu, g_uv, g_vv)
    pub fn hessian(&self, u: f64, v: f64) -> (f64, f64, f64) {
        match self {
            GraphFn::Constant(_) => (0.0, 0.0, 0.0),
            GraphFn::Ridge => {
                let q = Self::ridge_q(u, v);
                let s3 = q.sqrt() * q;
                (
                    -(q - u * u) / s3,
                    0.05 * u * v / s3,
                    -0.05 * (q - 0.05 * v * v) / s3,
                )
            }
        }
    }

    fn ridge_q(u: f64, v: f64) -> f64 {
        u * u + 5e-2 * v * v + 2.5e-5
    }

    fn ridge_s(u: f64, v: f64) -> f64 {
        Self::ridge_q(u, v).sqrt()
    }
}

/// Parameter domain of a graph surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamDomain {
    Disk { radius: f64 },
    Rect { u: (f64, f64), v: (f64, f64) },
}

impl ParamDomain {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        match self {
            ParamDomain::Disk { radius } => u * u + v * v <= radius * radius,
            ParamDomain::Rect { u: ur, v: vr } => {
                u >= ur.0 && u <= ur.1 && v >= vr.0 && v <= vr.1
            }
        }
    }

    /// Axis-aligned bounding box `((u0, u1), (v0, v1))`.
    pub fn bbox(&self) -> ((f64, f64), (f64, f64)) {
        match self {
            ParamDomain::Disk { radius } => ((-radius, *radius), (-radius, *radius)),
            ParamDomain::Rect { u, v } => (*u, *v),
        }
    }
}

/// Membership predicate for the high-curvature region `Gamma_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionSplit {
    /// Parameter-space ellipse `(u/ru)^2 + (v/rv)^2 <= 1` (graph surfaces).
    ParamEllipse { ru: f64, rv: f64 },
    /// Parameter-space half plane `u <= u_max` (graph surfaces).
    ParamHalfPlane { u_max: f64 },
    /// Ambient cap `z >= z_min` (closed surfaces).
    AmbientCap { z_min: f64 },
}

impl RegionSplit {
    /// Membership of a surface point in `Gamma_1`. Parameter-space variants
    /// need the frame to carry parameters.
    pub fn contains(&self, frame: &PointFrame) -> bool {
        match (self, frame.params) {
            (RegionSplit::ParamEllipse { ru, rv }, Some([u, v])) => {
                (u / ru).powi(2) + (v / rv).powi(2) <= 1.0
            }
            (RegionSplit::ParamHalfPlane { u_max }, Some([u, _])) => u <= *u_max,
            (RegionSplit::AmbientCap { z_min }, _) => frame.point.z >= *z_min,
            _ => false,
        }
    }
}

/// An analytic surface embedded in R^3.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    Sphere { radius: f64 },
    Torus { major_radius: f64, minor_radius: f64 },
    Graph { graph: GraphFn, domain: ParamDomain, region: Option<RegionSplit> },
}

/// Geometric frame of a surface point: the closest point itself, the unit
/// normal and shape operator there, the signed distance of the original
/// query, and the surface parameters when the surface is parametric.
#[derive(Debug, Clone)]
pub struct PointFrame {
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
    pub shape: Matrix3<f64>,
    pub signed_distance: f64,
    pub params: Option<[f64; 2]>,
}

impl PointFrame {
    /// Tangential projection `P = I - nu nu^t` at the frame point.
    pub fn tangential_projection(&self) -> Matrix3<f64> {
        Matrix3::identity() - self.normal * self.normal.transpose()
    }

    /// Spectral radius of the shape operator (largest |principal curvature|).
    pub fn curvature(&self) -> f64 {
        let (t1, t2) = tangent_basis(&self.normal);
        let a = (t1.transpose() * self.shape * t1)[0];
        let b = (t1.transpose() * self.shape * t2)[0];
        let c = (t2.transpose() * self.shape * t2)[0];
        let mean = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        (mean + disc).abs().max((mean - disc).abs())
    }
}

/// Any orthonormal pair spanning the plane orthogonal to `n` (|n| = 1).
pub fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let aux = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = (aux - n * n.dot(&aux)).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

impl Surface {
    pub fn sphere(radius: f64) -> Self {
        Surface::Sphere { radius }
    }

    pub fn torus(major_radius: f64, minor_radius: f64) -> Self {
        Surface::Torus { major_radius, minor_radius }
    }

    /// Flat graph `z = z0` over a rectangle; used by tests and the distance
    /// proxy calibration.
    pub fn plane(z0: f64, u: (f64, f64), v: (f64, f64)) -> Self {
        Surface::Graph {
            graph: GraphFn::Constant(z0),
            domain: ParamDomain::Rect { u, v },
            region: None,
        }
    }

    /// The fixed high-curvature ridge surface over the unit disk, with the
    /// ellipse split into `Gamma_1` / `Gamma_2`.
    pub fn ridge() -> Self {
        Surface::Graph {
            graph: GraphFn::Ridge,
            domain: ParamDomain::Disk { radius: 1.0 },
            region: Some(RegionSplit::ParamEllipse { ru: 0.05, rv: 0.5 }),
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, Surface::Sphere { .. } | Surface::Torus { .. })
    }

    pub fn region(&self) -> Option<RegionSplit> {
        match self {
            Surface::Graph { region, .. } => *region,
            _ => None,
        }
    }

    /// Rough diameter of the embedded surface; the finite-difference step for
    /// the `H`-gradient scales with it.
    pub fn diameter(&self) -> f64 {
        match self {
            Surface::Sphere { radius } => 2.0 * radius,
            Surface::Torus { major_radius, minor_radius } => 2.0 * (major_radius + minor_radius),
            Surface::Graph { domain, .. } => {
                let ((u0, u1), (v0, v1)) = domain.bbox();
                let du = u1 - u0;
                let dv = v1 - v0;
                // z-range sampled on a coarse grid
                let mut zmin = f64::INFINITY;
                let mut zmax = f64::NEG_INFINITY;
                for i in 0..=16 {
                    for j in 0..=16 {
                        let u = u0 + du * i as f64 / 16.0;
                        let v = v0 + dv * j as f64 / 16.0;
                        if domain.contains(u, v) {
                            let z = self.graph_fn().value(u, v);
                            zmin = zmin.min(z);
                            zmax = zmax.max(z);
                        }
                    }
                }
                let dz = if zmax > zmin { zmax - zmin } else { 0.0 };
                (du * du + dv * dv + dz * dz).sqrt()
            }
        }
    }

    fn graph_fn(&self) -> &GraphFn {
        match self {
            Surface::Graph { graph, .. } => graph,
            _ => panic!("not a graph surface"),
        }
    }

    /// Embedding of a parametric point. Sphere has no chart here; the
    /// parametric kinds are torus `(theta, phi)` and graph `(u, v)`.
    pub fn position(&self, p: [f64; 2]) -> Point3<f64> {
        match self {
            Surface::Sphere { .. } => panic!("sphere is not addressed by parameters"),
            Surface::Torus { major_radius: big_r, minor_radius: r } => {
                let (theta, phi) = (p[0], p[1]);
                let w = big_r + r * phi.cos();
                Point3::new(w * theta.cos(), w * theta.sin(), r * phi.sin())
            }
            Surface::Graph { graph, .. } => Point3::new(p[0], p[1], graph.value(p[0], p[1])),
        }
    }

    /// First derivatives of the embedding, columns `X_u`, `X_v`.
    fn position_jacobian(&self, p: [f64; 2]) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            Surface::Sphere { .. } => panic!("sphere is not addressed by parameters"),
            Surface::Torus { major_radius: big_r, minor_radius: r } => {
                let (theta, phi) = (p[0], p[1]);
                let w = big_r + r * phi.cos();
                let xu = Vector3::new(-w * theta.sin(), w * theta.cos(), 0.0);
                let xv = Vector3::new(
                    -r * phi.sin() * theta.cos(),
                    -r * phi.sin() * theta.sin(),
                    r * phi.cos(),
                );
                (xu, xv)
            }
            Surface::Graph { graph, .. } => {
                let (gu, gv) = graph.gradient(p[0], p[1]);
                (Vector3::new(1.0, 0.0, gu), Vector3::new(0.0, 1.0, gv))
            }
        }
    }

    fn position_hessian(&self, p: [f64; 2]) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        match self {
            Surface::Sphere { .. } => panic!("sphere is not addressed by parameters"),
            Surface::Torus { major_radius: big_r, minor_radius: r } => {
                let (theta, phi) = (p[0], p[1]);
                let w = big_r + r * phi.cos();
                let xuu = Vector3::new(-w * theta.cos(), -w * theta.sin(), 0.0);
                let xuv = Vector3::new(r * phi.sin() * theta.sin(), -r * phi.sin() * theta.cos(), 0.0);
                let xvv = Vector3::new(
                    -r * phi.cos() * theta.cos(),
                    -r * phi.cos() * theta.sin(),
                    -r * phi.sin(),
                );
                (xuu, xuv, xvv)
            }
            Surface::Graph { graph, .. } => {
                let (guu, guv, gvv) = graph.hessian(p[0], p[1]);
                (
                    Vector3::new(0.0, 0.0, guu),
                    Vector3::new(0.0, 0.0, guv),
                    Vector3::new(0.0, 0.0, gvv),
                )
            }
        }
    }

    /// Oriented unit normal at a parametric point: outward for the torus,
    /// upward (+z) for graphs.
    pub fn normal_at(&self, p: [f64; 2]) -> Vector3<f64> {
        let (xu, xv) = self.position_jacobian(p);
        xu.cross(&xv).normalize()
    }

    /// The shape operator `H = grad_Gamma nu` at a parametric point, as a
    /// symmetric 3x3 matrix annihilating the normal.
    pub fn shape_at(&self, p: [f64; 2]) -> Matrix3<f64> {
        let (xu, xv) = self.position_jacobian(p);
        let (xuu, xuv, xvv) = self.position_hessian(p);
        let nu = xu.cross(&xv).normalize();
        let g = Matrix2::new(xu.dot(&xu), xu.dot(&xv), xu.dot(&xv), xv.dot(&xv));
        let ii = Matrix2::new(xuu.dot(&nu), xuv.dot(&nu), xuv.dot(&nu), xvv.dot(&nu));
        let g_inv = g.try_inverse().expect("immersion has invertible metric");
        // H (X_u s) = grad nu in direction X_u s; the sphere fixes the sign:
        // outward normal gives H = P / radius.
        let m = -g_inv * ii * g_inv;
        let w = nalgebra::Matrix3x2::from_columns(&[xu, xv]);
        let h = w * m * w.transpose();
        // symmetrize away roundoff
        0.5 * (h + h.transpose())
    }

    /// Frame of an on-surface parametric point (`d = 0`).
    pub fn frame_at(&self, p: [f64; 2]) -> PointFrame {
        PointFrame {
            point: self.position(p),
            normal: self.normal_at(p),
            shape: self.shape_at(p),
            signed_distance: 0.0,
            params: Some(p),
        }
    }

    /// Shape operator at an on-surface point.
    pub fn shape_operator(&self, p: &Point3<f64>) -> Result<Matrix3<f64>> {
        match self {
            Surface::Sphere { radius } => {
                let nu = p.coords / p.coords.norm();
                Ok((Matrix3::identity() - nu * nu.transpose()) / *radius)
            }
            Surface::Torus { .. } => Ok(self.shape_at(self.torus_params(p)?)),
            Surface::Graph { .. } => Ok(self.shape_at([p.x, p.y])),
        }
    }

    fn torus_params(&self, p: &Point3<f64>) -> Result<[f64; 2]> {
        let Surface::Torus { major_radius: big_r, .. } = self else {
            unreachable!()
        };
        let rho = p.x.hypot(p.y);
        if rho < 1e-14 {
            return Err(Error::AmbiguousProjection);
        }
        Ok([p.y.atan2(p.x), p.z.atan2(rho - big_r)])
    }

    /// Closest point on the surface, with frame. The query must lie inside
    /// the local tubular neighborhood. Graph surfaces run a coarse grid scan
    /// followed by damped Newton; prefer [`Surface::closest_point_seeded`]
    /// when a parametric seed is available.
    pub fn closest_point(&self, x: &Point3<f64>) -> Result<PointFrame> {
        self.closest_point_impl(x, None)
    }

    /// Closest point with a parametric Newton seed (graph and torus kinds).
    pub fn closest_point_seeded(&self, x: &Point3<f64>, seed: [f64; 2]) -> Result<PointFrame> {
        self.closest_point_impl(x, Some(seed))
    }

    fn closest_point_impl(&self, x: &Point3<f64>, seed: Option<[f64; 2]>) -> Result<PointFrame> {
        match self {
            Surface::Sphere { radius } => {
                let r = x.coords.norm();
                if r < 1e-14 * radius.max(1.0) {
                    return Err(Error::AmbiguousProjection);
                }
                let nu = x.coords / r;
                let a = Point3::from(nu * *radius);
                Ok(PointFrame {
                    point: a,
                    normal: nu,
                    shape: (Matrix3::identity() - nu * nu.transpose()) / *radius,
                    signed_distance: r - radius,
                    params: None,
                })
            }
            Surface::Torus { major_radius: big_r, minor_radius: r } => {
                let rho = x.x.hypot(x.y);
                if rho < 1e-12 * big_r {
                    return Err(Error::AmbiguousProjection);
                }
                let ring = Vector3::new(big_r * x.x / rho, big_r * x.y / rho, 0.0);
                let w = x.coords - ring;
                let wn = w.norm();
                if wn < 1e-12 * r {
                    return Err(Error::AmbiguousProjection);
                }
                let nu = w / wn;
                let a = Point3::from(ring + nu * *r);
                let params = self.torus_params(&a)?;
                Ok(PointFrame {
                    point: a,
                    normal: nu,
                    shape: self.shape_at(params),
                    signed_distance: wn - r,
                    params: Some(params),
                })
            }
            Surface::Graph { domain, .. } => {
                let p = match seed {
                    Some(s) => match self.newton_project(x, s) {
                        Ok(p) => p,
                        Err(_) => self.grid_then_newton(x, domain)?,
                    },
                    None => self.grid_then_newton(x, domain)?,
                };
                let frame0 = self.frame_at(p);
                let r = x - frame0.point;
                Ok(PointFrame {
                    signed_distance: r.dot(&frame0.normal),
                    ..frame0
                })
            }
        }
    }

    /// Damped Newton on the first-order conditions of `|X(u,v) - x|^2 / 2`,
    /// with the squared distance as merit function and a gradient-descent
    /// fallback when the Newton direction is unusable.
    fn newton_project(&self, x: &Point3<f64>, seed: [f64; 2]) -> Result<[f64; 2]> {
        let tol = NEWTON_TOL * (1.0 + x.coords.norm());
        let mut p = Vector2::new(seed[0], seed[1]);
        // objective phi, its gradient F, and the Hessian J
        let eval = |p: &Vector2<f64>| -> (f64, Vector2<f64>, Matrix2<f64>) {
            let q = [p.x, p.y];
            let r = self.position(q) - x;
            let (xu, xv) = self.position_jacobian(q);
            let (xuu, xuv, xvv) = self.position_hessian(q);
            let f = Vector2::new(r.dot(&xu), r.dot(&xv));
            let j = Matrix2::new(
                xu.dot(&xu) + r.dot(&xuu),
                xu.dot(&xv) + r.dot(&xuv),
                xu.dot(&xv) + r.dot(&xuv),
                xv.dot(&xv) + r.dot(&xvv),
            );
            (0.5 * r.norm_squared(), f, j)
        };
        let (mut phi, mut f, mut j) = eval(&p);
        for _ in 0..NEWTON_MAX_ITER {
            if f.norm() <= tol {
                return Ok([p.x, p.y]);
            }
            let newton = j.try_inverse().map(|ji| -(ji * f));
            let step = match newton {
                // require a descent direction
                Some(s) if s.dot(&f) < 0.0 => s,
                _ => -f * (1.0 / (j.norm() + 1e-30)),
            };
            let mut t = 1.0;
            let mut advanced = false;
            while t >= 1e-10 {
                let cand = p + step * t;
                let (pc, fc, jc) = eval(&cand);
                if pc <= phi - 1e-4 * t * step.dot(&f).abs() || (t == 1.0 && fc.norm() < 0.5 * f.norm()) {
                    p = cand;
                    phi = pc;
                    f = fc;
                    j = jc;
                    advanced = true;
                    break;
                }
                t *= 0.5;
            }
            if !advanced {
                // no descent possible: p is a numerical critical point
                break;
            }
        }
        if f.norm() <= tol.max(1e-9 * (1.0 + x.coords.norm())) {
            Ok([p.x, p.y])
        } else {
            Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER, gradient_norm: f.norm() })
        }
    }

    fn grid_then_newton(&self, x: &Point3<f64>, domain: &ParamDomain) -> Result<[f64; 2]> {
        let ((u0, u1), (v0, v1)) = domain.bbox();
        let n = 48usize;
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        let mut second = (f64::INFINITY, [0.0, 0.0]);
        for i in 0..=n {
            for j in 0..=n {
                let u = u0 + (u1 - u0) * i as f64 / n as f64;
                let v = v0 + (v1 - v0) * j as f64 / n as f64;
                if !domain.contains(u, v) {
                    continue;
                }
                let d2 = (self.position([u, v]) - x).norm_squared();
                if d2 < best.0 {
                    second = best;
                    best = (d2, [u, v]);
                } else if d2 < second.0 {
                    second = (d2, [u, v]);
                }
            }
        }
        if !best.0.is_finite() {
            return Err(Error::EmptyRegion);
        }
        // Two separated minima at indistinguishable distance: not a valid
        // tubular-neighborhood query.
        let cell = ((u1 - u0).powi(2) + (v1 - v0).powi(2)).sqrt() / n as f64;
        let sep = ((best.1[0] - second.1[0]).powi(2) + (best.1[1] - second.1[1]).powi(2)).sqrt();
        if second.0.is_finite()
            && sep > 8.0 * cell
            && (second.0.sqrt() - best.0.sqrt()).abs() <= 1e-9 * (1.0 + best.0.sqrt())
        {
            return Err(Error::AmbiguousProjection);
        }
        self.newton_project(x, best.1)
    }

    /// Maximum spectral radius of `H` over a set of frames.
    pub fn kappa_max(frames: &[PointFrame]) -> Result<f64> {
        if frames.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(frames.iter().map(|f| f.curvature()).fold(0.0, f64::max))
    }

    /// Maximum over frames and entries (i,j) of `|grad H_ij|`, by central
    /// finite differences of the `H` field along an orthonormal tangent
    /// basis with step `h_fd`.
    pub fn gamma_max(&self, frames: &[PointFrame], h_fd: f64) -> Result<f64> {
        if frames.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let mut worst = 0.0f64;
        for f in frames {
            worst = worst.max(self.gamma_at(f, h_fd)?);
        }
        Ok(worst)
    }

    /// `max_ij |grad_Gamma H_ij|` at one frame by central differences.
    pub fn gamma_at(&self, frame: &PointFrame, h_fd: f64) -> Result<f64> {
        let (t1, t2) = tangent_basis(&frame.normal);
        let d1 = self.shape_difference(frame, &t1, h_fd)?;
        let d2 = self.shape_difference(frame, &t2, h_fd)?;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((d1[(i, j)].powi(2) + d2[(i, j)].powi(2)).sqrt());
            }
        }
        Ok(worst)
    }

    /// `(H(a(p + h t)) - H(a(p - h t))) / 2h`
    fn shape_difference(
        &self,
        frame: &PointFrame,
        t: &Vector3<f64>,
        h: f64,
    ) -> Result<Matrix3<f64>> {
        let step = |sign: f64| -> Result<Matrix3<f64>> {
            let q = frame.point + t * (sign * h);
            let f = match frame.params {
                Some(seed) => self.closest_point_seeded(&q, seed)?,
                None => self.closest_point(&q)?,
            };
            Ok(f.shape)
        };
        Ok((step(1.0)? - step(-1.0)?) / (2.0 * h))
    }

    /// Frames on a parametric grid of the domain bounding box, masked by
    /// `keep` (graph surfaces).
    pub fn param_grid_frames(
        &self,
        bbox: ((f64, f64), (f64, f64)),
        n: usize,
        keep: impl Fn(f64, f64) -> bool,
    ) -> Vec<PointFrame> {
        let ((u0, u1), (v0, v1)) = bbox;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let u = u0 + (u1 - u0) * i as f64 / (n - 1) as f64;
                let v = v0 + (v1 - v0) * j as f64 / (n - 1) as f64;
                if keep(u, v) {
                    out.push(self.frame_at([u, v]));
                }
            }
        }
        out
    }

    /// Maximum curvature over `Gamma_1` and over its complement, by dense
    /// grid sampling (`n` points per axis). The `Gamma_1` grid covers the
    /// region's bounding box so the ridge line is resolved.
    pub fn region_curvature_maxima(&self, n: usize) -> Result<(f64, f64)> {
        let Surface::Graph { domain, region: Some(RegionSplit::ParamEllipse { ru, rv }), .. } =
            self
        else {
            return Err(Error::Invalid(
                "region curvatures need a graph surface with a parameter-space region".into(),
            ));
        };
        let (ru, rv) = (*ru, *rv);
        let in_ellipse = move |u: f64, v: f64| (u / ru).powi(2) + (v / rv).powi(2) <= 1.0;
        let dom = *domain;
        let inner = self.param_grid_frames(((-ru, ru), (-rv, rv)), n, |u, v| {
            in_ellipse(u, v) && dom.contains(u, v)
        });
        let outer = self.param_grid_frames(domain.bbox(), n, |u, v| {
            dom.contains(u, v) && !in_ellipse(u, v)
        });
        Ok((Self::kappa_max(&inner)?, Self::kappa_max(&outer)?))
    }

    /// Does a frame lie in the high-curvature region `Gamma_1`?
    pub fn in_region_one(&self, frame: &PointFrame) -> bool {
        match self.region() {
            Some(region) => region.contains(frame),
            None => false,
        }
    }

    /// Attach or replace the `Gamma_1` region split.
    pub fn with_region(self, region: RegionSplit) -> Self {
        match self {
            Surface::Graph { graph, domain, .. } => {
                Surface::Graph { graph, domain, region: Some(region) }
            }
            other => other,
        }
    }
}

/// The compactly supported right-hand side of the ridge experiment:
/// `50 exp(1 / ((x - 0.2)^2 + y^2 - 0.2))` inside the support circle, else 0.
/// Exponents below -700 are clamped to zero before `exp`.
pub fn rhs_bump(p: &Point3<f64>) -> f64 {
    let rr = (p.x - 0.2) * (p.x - 0.2) + p.y * p.y;
    if rr < 0.2 {
        let e = 1.0 / (rr - 0.2);
        if e < -700.0 {
            0.0
        } else {
            50.0 * e.exp()
        }
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_radial_projection() {
        let s = Surface::sphere(1.0);
        let f = s.closest_point(&Point3::new(2.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(f.point, Point3::new(1.0, 0.0, 0.0), epsilon = 1e-14);
        assert_relative_eq!(f.signed_distance, 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.normal, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn sphere_on_surface_fixed_point() {
        let s = Surface::sphere(1.0);
        let f = s.closest_point(&Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(f.point, Point3::new(1.0, 0.0, 0.0));
        assert_eq!(f.signed_distance, 0.0);
    }

    #[test]
    fn sphere_signed_distance_is_radius_excess() {
        let s = Surface::sphere(1.0);
        for (x, y, z) in [(0.3, -0.4, 0.8), (1.5, 0.2, -0.1), (-0.2, 0.1, 0.05)] {
            let p = Point3::new(x, y, z);
            let f = s.closest_point(&p).unwrap();
            assert_relative_eq!(f.signed_distance, p.coords.norm() - 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn sphere_center_is_ambiguous() {
        let s = Surface::sphere(1.0);
        assert!(matches!(
            s.closest_point(&Point3::origin()),
            Err(Error::AmbiguousProjection)
        ));
    }

    #[test]
    fn sphere_shape_operator_is_tangential_projection() {
        let s = Surface::sphere(1.0);
        let p = Point3::new(0.6, 0.0, 0.8);
        let h = s.shape_operator(&p).unwrap();
        let expect = Matrix3::identity() - p.coords * p.coords.transpose();
        assert_relative_eq!(h, expect, epsilon = 1e-14);
    }

    #[test]
    fn plane_shape_operator_vanishes() {
        let s = Surface::plane(0.0, (-1.0, 1.0), (-1.0, 1.0));
        let h = s.shape_operator(&Point3::new(0.3, -0.2, 0.0)).unwrap();
        assert!(h.norm() < 1e-14);
    }

    #[test]
    fn ridge_projection_inverts_normal_step() {
        let s = Surface::ridge();
        let f0 = s.frame_at([0.3, 0.3]);
        let x = f0.point + f0.normal * 1e-3;
        let f = s.closest_point_seeded(&x, [0.3, 0.3]).unwrap();
        assert!((f.point - f0.point).norm() < 1e-8);
        assert!((f.signed_distance - 1e-3).abs() < 1e-8);
        // unseeded path agrees
        let g = s.closest_point(&x).unwrap();
        assert!((g.point - f0.point).norm() < 1e-8);
    }

    #[test]
    fn closest_point_idempotent_and_reconstructs() {
        let surfaces = [Surface::sphere(1.0), Surface::torus(1.0, 0.4), Surface::ridge()];
        let offsets = [0.0, 1e-3, -2e-3, 5e-2];
        for s in &surfaces {
            let params: Vec<[f64; 2]> = match s {
                Surface::Sphere { .. } => vec![],
                _ => vec![[0.3, 0.3], [-0.2, 0.55], [0.01, -0.1]],
            };
            let mut frames: Vec<PointFrame> = params.iter().map(|p| s.frame_at(*p)).collect();
            if matches!(s, Surface::Sphere { .. }) {
                for q in [[1.0, 0.0, 0.0], [0.6, 0.0, 0.8], [-0.3, 0.5, 0.81]] {
                    let p = Point3::from(Vector3::from_row_slice(&q).normalize());
                    frames.push(s.closest_point(&p).unwrap());
                }
            }
            for f0 in &frames {
                for off in offsets {
                    let x = f0.point + f0.normal * off;
                    let f = match f0.params {
                        Some(seed) => s.closest_point_seeded(&x, seed).unwrap(),
                        None => s.closest_point(&x).unwrap(),
                    };
                    // reconstruction x = a + d nu
                    let rec = f.point + f.normal * f.signed_distance;
                    assert!((rec - x).norm() <= 1e-10 * (1.0 + x.coords.norm()));
                    // idempotence a(a(x)) = a(x)
                    let f2 = match f.params {
                        Some(seed) => s.closest_point_seeded(&f.point, seed).unwrap(),
                        None => s.closest_point(&f.point).unwrap(),
                    };
                    assert!((f2.point - f.point).norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn shape_operator_identities() {
        let surfaces = [Surface::sphere(1.0), Surface::torus(1.0, 0.4), Surface::ridge()];
        for s in &surfaces {
            let frames: Vec<PointFrame> = match s {
                Surface::Sphere { .. } => [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [-0.3, 0.5, 0.81]]
                    .iter()
                    .map(|q| s.closest_point(&Point3::from(Vector3::from_row_slice(q).normalize())).unwrap())
                    .collect(),
                _ => vec![s.frame_at([0.3, 0.3]), s.frame_at([-0.1, 0.45])],
            };
            for f in &frames {
                let h = &f.shape;
                let p = f.tangential_projection();
                let scale = 1.0 + h.norm();
                assert!((h * f.normal).norm() <= 1e-8 * scale, "Hnu != 0");
                assert!((h - h.transpose()).amax() <= 1e-10 * scale, "H not symmetric");
                assert!((p * h - *h).norm() <= 1e-8 * scale, "PH != H");
                assert!((h * p - *h).norm() <= 1e-8 * scale, "HP != H");
            }
        }
    }

    #[test]
    fn ridge_shape_matches_finite_difference_of_normals() {
        let s = Surface::ridge();
        let f = s.frame_at([0.0, 0.25]);
        let (t1, t2) = tangent_basis(&f.normal);
        let h = 1e-5;
        let mut fd = Matrix3::zeros();
        for t in [t1, t2] {
            let np = s.closest_point_seeded(&(f.point + t * h), [0.0, 0.25]).unwrap().normal;
            let nm = s.closest_point_seeded(&(f.point - t * h), [0.0, 0.25]).unwrap().normal;
            fd += (np - nm) / (2.0 * h) * t.transpose();
        }
        // compare spectral radii
        let fd_frame = PointFrame { shape: 0.5 * (fd + fd.transpose()), ..f.clone() };
        let rho_fd = fd_frame.curvature();
        let rho = f.curvature();
        assert_relative_eq!(rho, rho_fd, max_relative = 1e-4);
    }

    #[test]
    fn sphere_gamma_bounded_by_two() {
        let s = Surface::sphere(1.0);
        let frames: Vec<PointFrame> = [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.5, 0.5, 0.7071]]
            .iter()
            .map(|q| s.closest_point(&Point3::from(Vector3::from_row_slice(q).normalize())).unwrap())
            .collect();
        let g = s.gamma_max(&frames, 1e-5 * s.diameter()).unwrap();
        assert!(g <= 2.0 + 1e-3, "gamma = {g}");
        assert!(g > 0.5, "sphere H field does vary: {g}");
    }

    #[test]
    fn plane_gamma_zero() {
        let s = Surface::plane(0.0, (-1.0, 1.0), (-1.0, 1.0));
        let frames = vec![s.frame_at([0.1, 0.2]), s.frame_at([-0.5, 0.4])];
        let g = s.gamma_max(&frames, 1e-5).unwrap();
        assert!(g.abs() < 1e-9);
    }

    #[test]
    fn ridge_gamma_richardson_consistent() {
        let s = Surface::ridge();
        let frames: Vec<PointFrame> =
            [[0.02, 0.1], [0.0, 0.3], [0.04, -0.2]].iter().map(|p| s.frame_at(*p)).collect();
        let h = 1e-5 * s.diameter();
        let g1 = s.gamma_max(&frames, h).unwrap();
        let g2 = s.gamma_max(&frames, h / 2.0).unwrap();
        assert!(g1.is_finite() && g1 > 0.0);
        assert_relative_eq!(g1, g2, max_relative = 0.05);
    }

    #[test]
    fn kappa_monotone_in_sample_set() {
        let s = Surface::ridge();
        let small: Vec<PointFrame> = [[0.1, 0.1], [0.2, 0.0]].iter().map(|p| s.frame_at(*p)).collect();
        let mut big = small.clone();
        big.push(s.frame_at([0.0, 0.0]));
        let k_small = Surface::kappa_max(&small).unwrap();
        let k_big = Surface::kappa_max(&big).unwrap();
        assert!(k_big >= k_small);
        assert!(matches!(Surface::kappa_max(&[]), Err(Error::EmptyRegion)));
    }

    #[test]
    fn bump_values() {
        // center of the support circle
        let v = rhs_bump(&Point3::new(0.2, 0.0, 0.5));
        assert_relative_eq!(v, 50.0 * (-5.0f64).exp(), epsilon = 1e-12);
        // outside the support
        let rr = 0.5f64;
        let v = rhs_bump(&Point3::new(0.2 + rr.sqrt(), 0.0, 0.0));
        assert_eq!(v, 0.0);
        // near the boundary: tiny but finite
        let x = 0.2 + 0.19f64.sqrt();
        let v = rhs_bump(&Point3::new(x, 0.0, 0.0));
        assert!(v.is_finite());
        assert!(v >= 0.0);
        assert!(v <= 50.0 * (-99.0f64).exp());
    }

    #[test]
    fn region_split_classification() {
        let s = Surface::ridge();
        assert!(s.in_region_one(&s.frame_at([0.0, 0.0])));
        assert!(s.in_region_one(&s.frame_at([0.0, 0.49])));
        assert!(!s.in_region_one(&s.frame_at([0.2, 0.0])));
        assert!(!s.in_region_one(&s.frame_at([0.0, 0.6])));
    }

    #[test]
    fn inverse_identity_with_small_distance() {
        // P (I - dH)^{-1} nu = 0 while eigenvalues of dH stay below 1/2
        let surfaces = [Surface::sphere(1.0), Surface::torus(1.0, 0.4), Surface::ridge()];
        for s in &surfaces {
            let f = match s {
                Surface::Sphere { .. } => s.closest_point(&Point3::new(0.0, 0.6, 0.8)).unwrap(),
                _ => s.frame_at([0.25, -0.3]),
            };
            let d = 0.4 / f.curvature().max(1.0);
            let m = (Matrix3::identity() - f.shape * d).try_inverse().unwrap();
            let res = f.tangential_projection() * m * f.normal;
            assert!(res.norm() <= 1e-8, "residual {}", res.norm());
        }
    }
}
