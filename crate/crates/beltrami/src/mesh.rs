//! Conforming surface triangle meshes.
//!
//! All vertices lie on the surface. Refinement keeps it that way: uniform
//! refinement and longest-edge bisection both project new edge midpoints
//! back to the surface through the closest-point map (boundary-edge
//! midpoints are projected to the boundary curve instead, so the discrete
//! boundary tracks the surface rim).

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{Matrix3x2, Point3, Vector3};

use crate::error::{Error, Result};
use crate::quadrature::DEGREE4;
use crate::surface::{ParamDomain, PointFrame, Surface};

/// Recursion bound for the conformity closure of longest-edge bisection.
const CLOSURE_BOUND: usize = 100;

/// Relative tolerance for "is a longest edge" ties.
const TIE_REL: f64 = 1e-9;

/// A conforming triangle mesh with every vertex on the owning surface.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub surface: Arc<Surface>,
    pub vertices: Vec<Point3<f64>>,
    /// Parameter coordinates per vertex where the surface is parametric.
    pub params: Vec<Option<[f64; 2]>>,
    /// Vertex-index triples with consistent orientation (facet normal on the
    /// same side as the surface normal).
    pub triangles: Vec<[usize; 3]>,
    pub boundary_vertex: Vec<bool>,
    /// Refinement generation per triangle.
    pub generation: Vec<u32>,
}

/// Per-triangle geometric record.
#[derive(Debug, Clone)]
pub struct TriangleGeometry {
    /// Diameter (longest edge length).
    pub h_t: f64,
    /// Flat area.
    pub area: f64,
    /// Unit facet normal, oriented with the surface.
    pub nu_h: Vector3<f64>,
    /// Edge matrix `[v1 - v0, v2 - v0]`.
    pub grad_x: Matrix3x2<f64>,
    /// Max spectral radius of the shape operator over vertices and lifted
    /// quadrature nodes.
    pub kappa_t: f64,
    /// Max finite-difference bound on `|grad H_ij|` over the same samples.
    pub gamma_t: f64,
    /// Shape regularity: diameter over inradius.
    pub shape_sigma: f64,
    /// Distance proxy to the high-curvature region, when computed.
    pub rho_t: Option<f64>,
}

impl SurfaceMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn edge_lengths(&self, t: usize) -> [f64; 3] {
        let [p0, p1, p2] = self.triangle_vertices(t);
        [(p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()]
    }

    pub fn diameter_of(&self, t: usize) -> f64 {
        let e = self.edge_lengths(t);
        e[0].max(e[1]).max(e[2])
    }

    /// Mesh size `h = max_T h_T`.
    pub fn max_h(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.diameter_of(t)).fold(0.0, f64::max)
    }

    pub fn min_h(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.diameter_of(t)).fold(f64::INFINITY, f64::min)
    }

    pub fn flat_area_of(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_vertices(t);
        0.5 * (p1 - p0).cross(&(p2 - p0)).norm()
    }

    pub fn total_flat_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.flat_area_of(t)).sum()
    }

    pub fn facet_normal(&self, t: usize) -> Vector3<f64> {
        let [p0, p1, p2] = self.triangle_vertices(t);
        (p1 - p0).cross(&(p2 - p0)).normalize()
    }

    pub fn barycenter(&self, t: usize) -> Point3<f64> {
        let [p0, p1, p2] = self.triangle_vertices(t);
        Point3::from((p0.coords + p1.coords + p2.coords) / 3.0)
    }

    /// Average of the vertex parameters, a Newton seed for points inside the
    /// triangle.
    pub fn param_seed(&self, t: usize) -> Option<[f64; 2]> {
        let [a, b, c] = self.triangles[t];
        match (self.params[a], self.params[b], self.params[c]) {
            (Some(pa), Some(pb), Some(pc)) => {
                Some([(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0])
            }
            _ => None,
        }
    }

    /// Closest-point frame of an off-surface point, seeded from a triangle.
    pub fn lift_point(&self, x: &Point3<f64>, t: usize) -> Result<PointFrame> {
        match self.param_seed(t) {
            Some(seed) => self.surface.closest_point_seeded(x, seed),
            None => self.surface.closest_point(x),
        }
    }

    /// Vertex frame without re-projection (vertices already lie on the
    /// surface).
    pub fn vertex_frame(&self, v: usize) -> Result<PointFrame> {
        match self.params[v] {
            Some(p) => Ok(self.surface.frame_at(p)),
            None => self.surface.closest_point(&self.vertices[v]),
        }
    }

    /// Edge-to-incident-triangles map, keyed by sorted vertex pair.
    pub fn edge_map(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let key = edge_key(tri[k], tri[(k + 1) % 3]);
                map.entry(key).or_default().push(t);
            }
        }
        map
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.boundary_vertex[v]).collect()
    }

    /// Structural and geometric validation: conformity (every edge has two
    /// incident triangles on closed surfaces, one or two otherwise),
    /// consistent orientation against the surface normal, and all vertices
    /// on the surface.
    pub fn validate(&self) -> Result<()> {
        let closed = self.surface.is_closed();
        for (key, tris) in self.edge_map() {
            let n = tris.len();
            if closed && n != 2 {
                return Err(Error::Invalid(format!(
                    "edge {key:?} has {n} incident triangles on a closed surface"
                )));
            }
            if !closed && !(n == 1 || n == 2) {
                return Err(Error::Invalid(format!("edge {key:?} has {n} incident triangles")));
            }
        }
        for t in 0..self.triangles.len() {
            let nu_h = self.facet_normal(t);
            let frame = self.lift_point(&self.barycenter(t), t)?;
            let dot = nu_h.dot(&frame.normal);
            if dot <= 0.0 {
                return Err(Error::NormalFlip { triangle: t, dot });
            }
        }
        for v in 0..self.vertices.len() {
            let f = self.vertex_frame(v)?;
            let d = (self.vertices[v] - f.point).norm();
            if d > 1e-9 {
                return Err(Error::Invalid(format!("vertex {v} is {d:.2e} off the surface")));
            }
        }
        Ok(())
    }

    /// Largest `h_T^2 kappa_T^2` violation above `c1`, if any.
    pub fn check_suff(&self, c1: f64) -> Result<()> {
        let mut worst: Option<(usize, f64)> = None;
        for t in 0..self.triangles.len() {
            let g = self.triangle_geometry(t)?;
            let val = g.h_t * g.h_t * g.kappa_t * g.kappa_t;
            if val > c1 && worst.map(|(_, w)| val > w).unwrap_or(true) {
                worst = Some((t, val));
            }
        }
        match worst {
            Some((triangle, value)) => Err(Error::SuffViolated { triangle, value, bound: c1 }),
            None => Ok(()),
        }
    }

    /// Per-triangle geometry: diameter, area, oriented facet normal, edge
    /// matrix, curvature and `H`-gradient bounds sampled at the three
    /// vertices plus the six lifted quadrature nodes.
    pub fn triangle_geometry(&self, t: usize) -> Result<TriangleGeometry> {
        let [p0, p1, p2] = self.triangle_vertices(t);
        let e = self.edge_lengths(t);
        let h_t = e[0].max(e[1]).max(e[2]);
        let raw = (p1 - p0).cross(&(p2 - p0));
        let area = 0.5 * raw.norm();
        if area <= 0.0 {
            return Err(Error::DegenerateTriangle { triangle: t, det: area });
        }
        let nu_h = raw / (2.0 * area);
        let grad_x = Matrix3x2::from_columns(&[p1 - p0, p2 - p0]);

        let mut frames = Vec::with_capacity(9);
        for &v in &self.triangles[t] {
            frames.push(self.vertex_frame(v)?);
        }
        for node in DEGREE4 {
            let x = p0 + (p1 - p0) * node.theta[0] + (p2 - p0) * node.theta[1];
            frames.push(self.lift_point(&x, t)?);
        }
        let kappa_t = Surface::kappa_max(&frames)?;
        let h_fd = 1e-5 * self.surface.diameter();
        let gamma_t = self.surface.gamma_max(&frames, h_fd)?;

        let perimeter: f64 = e.iter().sum();
        let shape_sigma = h_t * perimeter / (2.0 * area);
        Ok(TriangleGeometry {
            h_t,
            area,
            nu_h,
            grad_x,
            kappa_t,
            gamma_t,
            shape_sigma,
            rho_t: None,
        })
    }

    /// Vertex interpolant of a scalar field.
    pub fn interpolate(&self, f: impl Fn(&Point3<f64>) -> f64) -> Vec<f64> {
        self.vertices.iter().map(f).collect()
    }

    /// Uniform refinement: every triangle is split into four through its
    /// projected edge midpoints. Needs no conformity closure and halves the
    /// mesh size.
    pub fn refine_uniform(&self) -> Result<SurfaceMesh> {
        let mut editor = Editor::from_mesh(self);
        let keys: Vec<(usize, usize)> = editor.edge_map.keys().copied().collect();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(keys.len());
        let mut sorted = keys;
        sorted.sort_unstable();
        for key in sorted {
            let v = editor.new_midpoint_vertex(key)?;
            midpoint.insert(key, v);
        }
        let mut tris = Vec::with_capacity(self.triangles.len() * 4);
        let mut gens = Vec::with_capacity(self.triangles.len() * 4);
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            let mab = midpoint[&edge_key(a, b)];
            let mbc = midpoint[&edge_key(b, c)];
            let mca = midpoint[&edge_key(c, a)];
            let g = self.generation[t] + 1;
            for child in [[a, mab, mca], [mab, b, mbc], [mca, mbc, c], [mab, mbc, mca]] {
                tris.push(child);
                gens.push(g);
            }
        }
        Ok(SurfaceMesh {
            surface: self.surface.clone(),
            vertices: editor.vertices,
            params: editor.params,
            triangles: tris,
            boundary_vertex: editor.boundary_vertex,
            generation: gens,
        })
    }

    /// Conforming longest-edge bisection. Every marked triangle is bisected
    /// along longest edges (recursively restoring conformity) until its
    /// children are strictly smaller than it was; new vertices are projected
    /// edge midpoints.
    pub fn bisect(&self, marked: &[usize]) -> Result<SurfaceMesh> {
        if marked.is_empty() {
            return Ok(self.clone());
        }
        for &t in marked {
            if t >= self.triangles.len() {
                return Err(Error::Invalid(format!("marked triangle {t} out of range")));
            }
        }
        let mut editor = Editor::from_mesh(self);
        let mut work: Vec<(usize, f64)> =
            marked.iter().map(|&t| (t, self.diameter_of(t))).collect();
        while let Some((t, goal)) = work.pop() {
            if editor.alive[t] {
                if editor.diameter_of(t) < goal * (1.0 - 1e-10) {
                    continue;
                }
                editor.refine_triangle(t, 0)?;
            }
            if let Some([c0, c1]) = editor.children[t] {
                work.push((c0, goal));
                work.push((c1, goal));
            }
        }
        Ok(editor.finish(self.surface.clone()))
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Mutable mesh state during refinement.
struct Editor {
    vertices: Vec<Point3<f64>>,
    params: Vec<Option<[f64; 2]>>,
    boundary_vertex: Vec<bool>,
    triangles: Vec<[usize; 3]>,
    generation: Vec<u32>,
    alive: Vec<bool>,
    children: Vec<Option<[usize; 2]>>,
    edge_map: HashMap<(usize, usize), Vec<usize>>,
    surface: Arc<Surface>,
}

impl Editor {
    fn from_mesh(mesh: &SurfaceMesh) -> Self {
        Editor {
            vertices: mesh.vertices.clone(),
            params: mesh.params.clone(),
            boundary_vertex: mesh.boundary_vertex.clone(),
            triangles: mesh.triangles.clone(),
            generation: mesh.generation.clone(),
            alive: vec![true; mesh.triangles.len()],
            children: vec![None; mesh.triangles.len()],
            edge_map: mesh.edge_map(),
            surface: mesh.surface.clone(),
        }
    }

    fn diameter_of(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (pb - pa).norm().max((pc - pb).norm()).max((pa - pc).norm())
    }

    fn edge_len(&self, key: (usize, usize)) -> f64 {
        (self.vertices[key.0] - self.vertices[key.1]).norm()
    }

    /// The longest edge of a triangle; ties break toward the smallest key so
    /// that neighbors agree on shared edges.
    fn longest_edge(&self, t: usize) -> (usize, usize) {
        let [a, b, c] = self.triangles[t];
        let mut keys = [edge_key(a, b), edge_key(b, c), edge_key(c, a)];
        keys.sort_unstable();
        let mut best = keys[0];
        let mut best_len = self.edge_len(best);
        for key in &keys[1..] {
            let len = self.edge_len(*key);
            if len > best_len * (1.0 + TIE_REL) {
                best = *key;
                best_len = len;
            }
        }
        best
    }

    fn is_longest_edge(&self, t: usize, key: (usize, usize)) -> bool {
        let len = self.edge_len(key);
        let [a, b, c] = self.triangles[t];
        for other in [edge_key(a, b), edge_key(b, c), edge_key(c, a)] {
            if self.edge_len(other) > len * (1.0 + TIE_REL) {
                return false;
            }
        }
        true
    }

    /// Bisect triangle `t` along its longest edge, first refining any
    /// neighbor for which that edge is not a longest edge (Rivara closure).
    fn refine_triangle(&mut self, t: usize, depth: usize) -> Result<()> {
        if depth > CLOSURE_BOUND {
            return Err(Error::NonTermination { bound: CLOSURE_BOUND });
        }
        loop {
            if !self.alive[t] {
                return Ok(());
            }
            let key = self.longest_edge(t);
            let incident = self.edge_map.get(&key).cloned().unwrap_or_default();
            let mut blocked = None;
            for &u in &incident {
                if u != t && self.alive[u] && !self.is_longest_edge(u, key) {
                    blocked = Some(u);
                    break;
                }
            }
            match blocked {
                Some(u) => self.refine_triangle(u, depth + 1)?,
                None => {
                    self.split_edge(key)?;
                    return Ok(());
                }
            }
        }
    }

    fn new_midpoint_vertex(&mut self, key: (usize, usize)) -> Result<usize> {
        let (a, b) = key;
        let incident = self.edge_map.get(&key).map(|v| v.len()).unwrap_or(0);
        let on_boundary = incident == 1;
        let (point, params, boundary) = if on_boundary {
            self.boundary_midpoint(a, b)?
        } else {
            let mid = Point3::from((self.vertices[a].coords + self.vertices[b].coords) / 2.0);
            let seed = match (self.params[a], self.params[b]) {
                (Some(pa), Some(pb)) => Some([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0]),
                _ => None,
            };
            let frame = match seed {
                Some(s) => self.surface.closest_point_seeded(&mid, s),
                None => self.surface.closest_point(&mid),
            }
            .map_err(|e| Error::ProjectionFailed { source: Box::new(e) })?;
            (frame.point, frame.params, false)
        };
        self.vertices.push(point);
        self.params.push(params);
        self.boundary_vertex.push(boundary);
        Ok(self.vertices.len() - 1)
    }

    /// Midpoint of a boundary edge, projected to the surface rim so the
    /// discrete boundary follows the parameter-domain boundary.
    fn boundary_midpoint(&self, a: usize, b: usize) -> Result<(Point3<f64>, Option<[f64; 2]>, bool)> {
        let (pa, pb) = match (self.params[a], self.params[b]) {
            (Some(pa), Some(pb)) => (pa, pb),
            _ => {
                return Err(Error::Invalid(
                    "boundary refinement needs vertex parameters".into(),
                ))
            }
        };
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        let rim = match &*self.surface {
            Surface::Graph { domain: ParamDomain::Disk { radius }, .. } => {
                let n = (mid[0] * mid[0] + mid[1] * mid[1]).sqrt();
                if n < 1e-14 {
                    return Err(Error::AmbiguousProjection);
                }
                [mid[0] * radius / n, mid[1] * radius / n]
            }
            // rectangle boundary edges are straight in parameter space
            _ => mid,
        };
        Ok((self.surface.position(rim), Some(rim), true))
    }

    /// Split an edge, bisecting every incident triangle.
    fn split_edge(&mut self, key: (usize, usize)) -> Result<()> {
        let m = self.new_midpoint_vertex(key)?;
        let incident = self.edge_map.remove(&key).unwrap_or_default();
        for t in incident {
            if !self.alive[t] {
                continue;
            }
            let tri = self.triangles[t];
            let i = (0..3)
                .find(|&i| edge_key(tri[i], tri[(i + 1) % 3]) == key)
                .expect("incident triangle contains the edge");
            let (va, vb, vc) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
            let gen = self.generation[t] + 1;
            let c0 = self.push_triangle([va, m, vc], gen);
            let c1 = self.push_triangle([m, vb, vc], gen);
            self.alive[t] = false;
            self.children[t] = Some([c0, c1]);
            for k in 0..3 {
                let e = edge_key(tri[k], tri[(k + 1) % 3]);
                if e != key {
                    if let Some(list) = self.edge_map.get_mut(&e) {
                        list.retain(|&x| x != t);
                    }
                }
            }
        }
        Ok(())
    }

    fn push_triangle(&mut self, tri: [usize; 3], gen: u32) -> usize {
        let id = self.triangles.len();
        self.triangles.push(tri);
        self.generation.push(gen);
        self.alive.push(true);
        self.children.push(None);
        for k in 0..3 {
            let e = edge_key(tri[k], tri[(k + 1) % 3]);
            self.edge_map.entry(e).or_default().push(id);
        }
        id
    }

    fn finish(self, surface: Arc<Surface>) -> SurfaceMesh {
        let mut triangles = Vec::new();
        let mut generation = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if self.alive[t] {
                triangles.push(*tri);
                generation.push(self.generation[t]);
            }
        }
        SurfaceMesh {
            surface,
            vertices: self.vertices,
            params: self.params,
            triangles,
            boundary_vertex: self.boundary_vertex,
            generation,
        }
    }
}

/// Builds an initial conforming mesh with `max h_T <= target_h`: a projected
/// icosahedron subdivision for spheres, a structured parametric grid for the
/// torus, and a structured disk or rectangle triangulation mapped through the
/// parameterization for graph surfaces.
pub fn build_initial_mesh(surface: Arc<Surface>, target_h: f64) -> Result<SurfaceMesh> {
    if !(target_h > 0.0) {
        return Err(Error::Invalid("target_h must be positive".into()));
    }
    match &*surface {
        Surface::Sphere { .. } => {
            let mut mesh = icosahedron(surface);
            while mesh.max_h() > target_h {
                mesh = mesh.refine_uniform()?;
            }
            Ok(mesh)
        }
        Surface::Torus { .. } => {
            let mut n = 8usize;
            loop {
                let mesh = torus_grid(surface.clone(), 2 * n, n)?;
                if mesh.max_h() <= target_h || n > 4096 {
                    return Ok(mesh);
                }
                n = (n * 3) / 2;
            }
        }
        Surface::Graph { domain, .. } => match domain {
            ParamDomain::Disk { .. } => {
                let mut rings = ((2.0 / target_h).ceil() as usize).max(2);
                loop {
                    let mesh = structured_disk(surface.clone(), rings)?;
                    if mesh.max_h() <= target_h || rings > 8192 {
                        return Ok(mesh);
                    }
                    rings = (rings * 5) / 4 + 1;
                }
            }
            ParamDomain::Rect { u, v } => {
                let mut n = (((u.1 - u.0).max(v.1 - v.0) / target_h).ceil() as usize).max(1);
                loop {
                    let du = u.1 - u.0;
                    let dv = v.1 - v.0;
                    let nu = ((du / (du.max(dv)) * n as f64).ceil() as usize).max(1);
                    let nv = ((dv / (du.max(dv)) * n as f64).ceil() as usize).max(1);
                    let mesh = structured_rect(surface.clone(), nu, nv)?;
                    if mesh.max_h() <= target_h || n > 8192 {
                        return Ok(mesh);
                    }
                    n = (n * 5) / 4 + 1;
                }
            }
        },
    }
}

/// The icosahedron with vertices on the sphere.
pub fn icosahedron(surface: Arc<Surface>) -> SurfaceMesh {
    let Surface::Sphere { radius } = &*surface else {
        panic!("icosahedron base mesh is for spheres");
    };
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let s = (1.0 + phi * phi).sqrt();
    let (a, b) = (1.0 / s, phi / s);
    let raw = [
        [-a, b, 0.0],
        [a, b, 0.0],
        [-a, -b, 0.0],
        [a, -b, 0.0],
        [0.0, -a, b],
        [0.0, a, b],
        [0.0, -a, -b],
        [0.0, a, -b],
        [b, 0.0, -a],
        [b, 0.0, a],
        [-b, 0.0, -a],
        [-b, 0.0, a],
    ];
    let faces: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let vertices: Vec<Point3<f64>> = raw
        .iter()
        .map(|v| Point3::from(Vector3::from_row_slice(v).normalize() * *radius))
        .collect();
    let n = vertices.len();
    SurfaceMesh {
        surface,
        vertices,
        params: vec![None; n],
        triangles: faces.to_vec(),
        boundary_vertex: vec![false; n],
        generation: vec![0; 20],
    }
}

/// Structured triangulation of a disk parameter domain: `rings` concentric
/// vertex rings (ring `j` holds `6j` vertices at radius `j/rings`), mapped
/// through the surface parameterization. Boundary vertices sit exactly on
/// the domain rim.
pub fn structured_disk(surface: Arc<Surface>, rings: usize) -> Result<SurfaceMesh> {
    let Surface::Graph { domain: ParamDomain::Disk { radius }, .. } = &*surface else {
        return Err(Error::Invalid("structured disk mesh needs a disk-domain graph".into()));
    };
    let radius = *radius;
    if rings < 1 {
        return Err(Error::Invalid("need at least one ring".into()));
    }
    let mut verts_param: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize; rings + 1];
    for j in 1..=rings {
        ring_start[j] = verts_param.len();
        let n = 6 * j;
        let r = radius * j as f64 / rings as f64;
        for i in 0..n {
            let ang = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            verts_param.push([r * ang.cos(), r * ang.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(6 * rings * rings);
    // innermost fan
    for i in 0..6 {
        triangles.push([0, 1 + i, 1 + (i + 1) % 6]);
    }
    // ring bands: walk inner and outer rings by angle
    for j in 2..=rings {
        let (n_in, n_out) = (6 * (j - 1), 6 * j);
        let (s_in, s_out) = (ring_start[j - 1], ring_start[j]);
        let mut i_in = 0usize;
        let mut i_out = 0usize;
        let ang = |i: usize, n: usize| 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        while i_in < n_in || i_out < n_out {
            let next_in = ang(i_in + 1, n_in);
            let next_out = ang(i_out + 1, n_out);
            let vi = s_in + i_in % n_in;
            let vo = s_out + i_out % n_out;
            if i_out < n_out && (i_in == n_in || next_out <= next_in) {
                let vo1 = s_out + (i_out + 1) % n_out;
                triangles.push([vi, vo, vo1]);
                i_out += 1;
            } else {
                let vi1 = s_in + (i_in + 1) % n_in;
                triangles.push([vo, vi1, vi]);
                i_in += 1;
            }
        }
    }
    let vertices: Vec<Point3<f64>> = verts_param.iter().map(|p| surface.position(*p)).collect();
    let n = vertices.len();
    let boundary_vertex: Vec<bool> = (0..n).map(|v| v >= ring_start[rings]).collect();
    let gens = vec![0; triangles.len()];
    let mesh = SurfaceMesh {
        surface,
        vertices,
        params: verts_param.into_iter().map(Some).collect(),
        triangles,
        boundary_vertex,
        generation: gens,
    };
    Ok(mesh)
}

/// Structured triangulation of a rectangle parameter domain.
pub fn structured_rect(surface: Arc<Surface>, nu: usize, nv: usize) -> Result<SurfaceMesh> {
    let Surface::Graph { domain: ParamDomain::Rect { u, v }, .. } = &*surface else {
        return Err(Error::Invalid("structured rectangle mesh needs a rect-domain graph".into()));
    };
    let (u, v) = (*u, *v);
    let mut verts_param = Vec::with_capacity((nu + 1) * (nv + 1));
    for j in 0..=nv {
        for i in 0..=nu {
            verts_param.push([
                u.0 + (u.1 - u.0) * i as f64 / nu as f64,
                v.0 + (v.1 - v.0) * j as f64 / nv as f64,
            ]);
        }
    }
    let idx = |i: usize, j: usize| j * (nu + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let vertices: Vec<Point3<f64>> = verts_param.iter().map(|p| surface.position(*p)).collect();
    let boundary_vertex: Vec<bool> = verts_param
        .iter()
        .map(|p| {
            p[0] <= u.0 + 1e-14 || p[0] >= u.1 - 1e-14 || p[1] <= v.0 + 1e-14 || p[1] >= v.1 - 1e-14
        })
        .collect();
    let gens = vec![0; triangles.len()];
    Ok(SurfaceMesh {
        surface,
        vertices,
        params: verts_param.into_iter().map(Some).collect(),
        triangles,
        boundary_vertex,
        generation: gens,
    })
}

/// Structured parametric grid on the torus (closed, so the grid wraps).
pub fn torus_grid(surface: Arc<Surface>, n_theta: usize, n_phi: usize) -> Result<SurfaceMesh> {
    if !matches!(&*surface, Surface::Torus { .. }) {
        return Err(Error::Invalid("torus grid needs a torus".into()));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut verts_param = Vec::with_capacity(n_theta * n_phi);
    for j in 0..n_phi {
        for i in 0..n_theta {
            verts_param.push([tau * i as f64 / n_theta as f64, tau * j as f64 / n_phi as f64]);
        }
    }
    let idx = |i: usize, j: usize| (j % n_phi) * n_theta + (i % n_theta);
    let mut triangles = Vec::with_capacity(2 * n_theta * n_phi);
    for j in 0..n_phi {
        for i in 0..n_theta {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let vertices: Vec<Point3<f64>> = verts_param.iter().map(|p| surface.position(*p)).collect();
    let n = vertices.len();
    let gens = vec![0; triangles.len()];
    Ok(SurfaceMesh {
        surface,
        vertices,
        params: verts_param.into_iter().map(Some).collect(),
        triangles,
        boundary_vertex: vec![false; n],
        generation: gens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::GraphFn;

    fn unit_sphere() -> Arc<Surface> {
        Arc::new(Surface::sphere(1.0))
    }

    #[test]
    fn icosahedron_counts_and_vertices_on_sphere() {
        let mesh = build_initial_mesh(unit_sphere(), 1.2).unwrap();
        assert_eq!(mesh.vertex_count(), 12);
        assert_eq!(mesh.triangle_count(), 20);
        for v in &mesh.vertices {
            assert!((v.coords.norm() - 1.0).abs() < 1e-14);
        }
        mesh.validate().unwrap();
    }

    #[test]
    fn bisect_empty_marking_is_identity() {
        let mesh = icosahedron(unit_sphere());
        let out = mesh.bisect(&[]).unwrap();
        assert_eq!(out.vertex_count(), mesh.vertex_count());
        assert_eq!(out.triangle_count(), mesh.triangle_count());
    }

    #[test]
    fn bisect_all_icosahedron_gives_uniform_counts() {
        let mesh = icosahedron(unit_sphere());
        let marked: Vec<usize> = (0..20).collect();
        let out = mesh.bisect(&marked).unwrap();
        assert_eq!(out.triangle_count(), 80);
        assert_eq!(out.vertex_count(), 42);
        for v in &out.vertices {
            assert!((v.coords.norm() - 1.0).abs() < 1e-12);
        }
        out.validate().unwrap();
        // children strictly smaller than the parent diameter
        let h0 = mesh.max_h();
        assert!(out.max_h() < h0);
    }

    #[test]
    fn bisect_single_triangle_stays_conforming() {
        let mesh = icosahedron(unit_sphere()).refine_uniform().unwrap();
        let before = mesh.triangle_count();
        let out = mesh.bisect(&[7]).unwrap();
        assert!(out.triangle_count() > before);
        out.validate().unwrap();
    }

    #[test]
    fn bisect_splits_marked_triangle() {
        let mesh = icosahedron(unit_sphere());
        let marked_verts = {
            let mut v = mesh.triangles[3];
            v.sort_unstable();
            v
        };
        let out = mesh.bisect(&[3]).unwrap();
        out.validate().unwrap();
        // the marked triangle no longer exists
        assert!(!out.triangles.iter().any(|t| {
            let mut v = *t;
            v.sort_unstable();
            v == marked_verts
        }));
        // marking everything shrinks every diameter strictly
        let all: Vec<usize> = (0..mesh.triangle_count()).collect();
        let uniform = mesh.bisect(&all).unwrap();
        let h0 = mesh.min_h();
        assert!(uniform.max_h() < h0 * (1.0 - 1e-10));
    }

    #[test]
    fn uniform_refinement_halves_h() {
        let mut mesh = icosahedron(unit_sphere());
        for _ in 0..3 {
            let h0 = mesh.max_h();
            mesh = mesh.refine_uniform().unwrap();
            let ratio = mesh.max_h() / h0;
            assert!(
                (0.45..=0.75).contains(&ratio),
                "per-sweep h ratio {ratio} outside [0.45, 0.75]"
            );
            mesh.validate().unwrap();
        }
    }

    #[test]
    fn sphere_area_converges() {
        let mesh = build_initial_mesh(unit_sphere(), 0.3).unwrap();
        let sphere_area = 4.0 * std::f64::consts::PI;
        let a0 = mesh.total_flat_area();
        assert!((a0 - sphere_area).abs() / sphere_area < 0.05);
        let finer = mesh.refine_uniform().unwrap();
        let a1 = finer.total_flat_area();
        assert!((a1 - sphere_area).abs() < (a0 - sphere_area).abs());
        assert!(a1 < sphere_area, "flat area approaches from below");
    }

    #[test]
    fn shape_regularity_bounded_under_refinement() {
        let mut mesh = icosahedron(unit_sphere());
        let sigma0: f64 = (0..mesh.triangle_count())
            .map(|t| mesh.triangle_geometry(t).unwrap().shape_sigma)
            .fold(0.0, f64::max);
        for _ in 0..4 {
            mesh = mesh.refine_uniform().unwrap();
        }
        let sigma: f64 = (0..mesh.triangle_count())
            .map(|t| mesh.triangle_geometry(t).unwrap().shape_sigma)
            .fold(0.0, f64::max);
        assert!(sigma <= 2.0 * sigma0, "sigma grew from {sigma0} to {sigma}");
    }

    #[test]
    fn ridge_disk_vertices_satisfy_graph_equation() {
        let surface = Arc::new(Surface::ridge());
        let mesh = structured_disk(surface, 6).unwrap();
        for v in &mesh.vertices {
            let z = 1.0 - (v.x * v.x + 5e-2 * v.y * v.y + 2.5e-5).sqrt();
            assert!((v.z - z).abs() < 1e-12);
        }
        mesh.validate().unwrap();
        // boundary ring exactly on the unit circle
        for (i, v) in mesh.vertices.iter().enumerate() {
            if mesh.boundary_vertex[i] {
                assert!((v.x.hypot(v.y) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disk_boundary_midpoints_stay_on_rim() {
        let surface = Arc::new(Surface::ridge());
        let mesh = structured_disk(surface, 4).unwrap();
        let refined = mesh.refine_uniform().unwrap();
        refined.validate().unwrap();
        for (i, v) in refined.vertices.iter().enumerate() {
            if refined.boundary_vertex[i] {
                assert!((v.x.hypot(v.y) - 1.0).abs() < 1e-12, "boundary vertex off rim");
            }
        }
        // refinement preserved the boundary vertex count relation: each
        // boundary edge produced exactly one new boundary vertex
        let nb0 = mesh.boundary_vertices().len();
        let nb1 = refined.boundary_vertices().len();
        assert_eq!(nb1, 2 * nb0);
    }

    #[test]
    fn plane_triangle_geometry_is_flat() {
        let surface = Arc::new(Surface::plane(0.0, (0.0, 1.0), (0.0, 1.0)));
        let mesh = structured_rect(surface, 2, 2).unwrap();
        for t in 0..mesh.triangle_count() {
            let g = mesh.triangle_geometry(t).unwrap();
            assert!(g.kappa_t.abs() < 1e-10);
            assert!(g.gamma_t.abs() < 1e-9);
        }
    }

    #[test]
    fn icosahedron_face_curvature_is_one() {
        let mesh = icosahedron(unit_sphere());
        let g = mesh.triangle_geometry(0).unwrap();
        assert!((g.kappa_t - 1.0).abs() < 1e-8, "kappa_T = {}", g.kappa_t);
        assert!(g.h_t > 1.0 && g.h_t < 1.1);
    }

    #[test]
    fn ridge_straddling_triangle_kappa_close_to_dense_maximum() {
        let surface = Arc::new(Surface::ridge());
        let s2 = surface.clone();
        let mesh = structured_disk(surface, 24).unwrap();
        // find a triangle whose parameter footprint crosses u = 0 near the origin
        let mut pick = None;
        for t in 0..mesh.triangle_count() {
            let [a, b, c] = mesh.triangles[t];
            let us = [mesh.params[a].unwrap()[0], mesh.params[b].unwrap()[0], mesh.params[c].unwrap()[0]];
            let vs = [mesh.params[a].unwrap()[1], mesh.params[b].unwrap()[1], mesh.params[c].unwrap()[1]];
            let umin = us.iter().cloned().fold(f64::INFINITY, f64::min);
            let umax = us.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if umin < -1e-6 && umax > 1e-6 && vs.iter().all(|v| v.abs() < 0.3) {
                pick = Some(t);
                break;
            }
        }
        let t = pick.expect("some triangle straddles the ridge");
        let g = mesh.triangle_geometry(t).unwrap();
        // dense oracle: sample the lifted footprint at 100x the quadrature density
        let [p0, p1, p2] = mesh.triangle_vertices(t);
        let mut dense: f64 = 0.0;
        let n = 60;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let t1 = i as f64 / n as f64;
                let t2 = j as f64 / n as f64;
                let x = p0 + (p1 - p0) * t1 + (p2 - p0) * t2;
                let f = mesh.lift_point(&x, t).unwrap();
                dense = dense.max(f.curvature());
            }
        }
        assert!(
            (g.kappa_t - dense).abs() <= 0.005 * dense,
            "sampled kappa_T {} vs dense max {dense}",
            g.kappa_t
        );
        let _ = s2;
    }

    #[test]
    fn torus_mesh_is_conforming_and_closed() {
        let surface = Arc::new(Surface::torus(1.0, 0.4));
        let mesh = torus_grid(surface, 24, 12).unwrap();
        mesh.validate().unwrap();
        for (_, tris) in mesh.edge_map() {
            assert_eq!(tris.len(), 2);
        }
    }

    #[test]
    fn check_suff_reports_worst_triangle() {
        let mesh = icosahedron(unit_sphere());
        // icosahedron has h ~ 1.05 and kappa = 1, so h^2 kappa^2 ~ 1.1 > 0.25
        match mesh.check_suff(0.25) {
            Err(Error::SuffViolated { value, bound, .. }) => {
                assert!(value > bound);
            }
            other => panic!("expected SuffViolated, got {other:?}"),
        }
        let fine = mesh.refine_uniform().unwrap().refine_uniform().unwrap();
        fine.check_suff(0.25).unwrap();
    }

    #[test]
    fn strip_plane_mesh_counts() {
        let surface = Arc::new(Surface::Graph {
            graph: GraphFn::Constant(0.0),
            domain: ParamDomain::Rect { u: (0.0, 4.0), v: (0.0, 1.0) },
            region: None,
        });
        let mesh = structured_rect(surface, 8, 2).unwrap();
        assert_eq!(mesh.vertex_count(), 27);
        assert_eq!(mesh.triangle_count(), 32);
        mesh.validate().unwrap();
    }
}
