//! P1 surface finite elements: stiffness and load assembly on the flat
//! triangulation, mean-zero handling for closed surfaces, Dirichlet
//! elimination for surfaces with boundary, and a Jacobi-preconditioned
//! conjugate gradient solver.
//!
//! The discrete problem is
//! `int_{Gamma_h} grad_{Gamma_h} u_h . grad_{Gamma_h} v_h dA_h
//!  = int_{Gamma_h} f_h v_h dA_h` with `f_h = f . a` pulled back along the
//! closest-point map and, on closed surfaces, shifted to zero mean so the
//! compatibility condition holds exactly in floating point.

use std::time::Instant;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;
use crate::quadrature::{hat_values, DEGREE4};

/// Symmetric sparse matrix in compressed-row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Deterministic build: triplets are sorted by (row, col) and duplicate
    /// entries accumulated.
    pub fn from_triplets(n: usize, mut triplets: Vec<(u32, u32, f64)>) -> CsrMatrix {
        triplets.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<u32> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
            row_ptr[r as usize + 1] = col_idx.len();
        }
        for i in 1..=n {
            if row_ptr[i] < row_ptr[i - 1] {
                row_ptr[i] = row_ptr[i - 1];
            }
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] as usize == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] as usize == j {
                return self.values[k];
            }
        }
        0.0
    }

    /// `max_ij |a_ij - a_ji|`
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k] as usize;
                if j >= i {
                    worst = worst.max((self.values[k] - self.get(j, i)).abs());
                }
            }
        }
        worst
    }

    /// `max_i |sum_j a_ij|`: the kernel residual against constants.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.values[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

/// Constraint fixing the kernel of the stiffness operator.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// Closed surface: constants are in the kernel; iterate orthogonally to
    /// them and report coefficients with lumped-mass zero average.
    MeanZero { lumped_mass: Vec<f64> },
    /// Surface with boundary: homogeneous Dirichlet values on the listed
    /// vertices, eliminated symmetrically. `map[v]` is the reduced index of
    /// an interior vertex.
    DirichletOnBoundary { fixed: Vec<usize>, map: Vec<Option<u32>>, full_n: usize },
}

/// The assembled discrete problem.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraint: Constraint,
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Coefficients over all mesh vertices (boundary values filled with 0).
    pub coefficients: Vec<f64>,
    pub cg_iterations: usize,
    /// Final relative residual.
    pub residual: f64,
    pub dof_count: usize,
    /// Mesh size, when the caller recorded it.
    pub h: f64,
    pub psi_h: Option<f64>,
    pub lambda_h: Option<f64>,
    /// (L2, H1) errors, when the caller measured them.
    pub errors: Option<(f64, f64)>,
    pub wall_time: f64,
}

/// Assemble the P1 stiffness matrix over all mesh vertices: entry (i, j) is
/// `sum_T A_T grad phi_i . grad phi_j` with tangential hat gradients on each
/// flat triangle. Symmetric, positive semidefinite, row sums zero.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> Result<CsrMatrix> {
    let n = mesh.vertex_count();
    let mut triplets: Vec<(u32, u32, f64)> = Vec::with_capacity(9 * mesh.triangle_count());
    for t in 0..mesh.triangle_count() {
        let [p0, p1, p2] = mesh.triangle_vertices(t);
        let raw = (p1 - p0).cross(&(p2 - p0));
        let area = 0.5 * raw.norm();
        if area <= 0.0 {
            return Err(Error::DegenerateTriangle { triangle: t, det: area });
        }
        let nu_h = raw / (2.0 * area);
        let g = [
            nu_h.cross(&(p2 - p1)) / (2.0 * area),
            nu_h.cross(&(p0 - p2)) / (2.0 * area),
            nu_h.cross(&(p1 - p0)) / (2.0 * area),
        ];
        let idx = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((idx[a] as u32, idx[b] as u32, area * g[a].dot(&g[b])));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, triplets))
}

/// Assemble the load vector `rhs_i = int_{Gamma_h} f_h phi_i dA_h` with the
/// degree-4 rule, where `f_h` is the pullback `f . a`, mean-corrected on
/// closed surfaces so that `sum_i rhs_i = 0` exactly.
pub fn assemble_load(mesh: &SurfaceMesh, f: impl Fn(&Point3<f64>) -> f64) -> Result<Vec<f64>> {
    let nt = mesh.triangle_count();
    let nq = DEGREE4.len();
    let mut values = vec![0.0f64; nt * nq];
    let mut areas = vec![0.0f64; nt];
    for t in 0..nt {
        let [p0, p1, p2] = mesh.triangle_vertices(t);
        areas[t] = 0.5 * (p1 - p0).cross(&(p2 - p0)).norm();
        for (q, node) in DEGREE4.iter().enumerate() {
            let x = p0 + (p1 - p0) * node.theta[0] + (p2 - p0) * node.theta[1];
            let frame = mesh.lift_point(&x, t)?;
            values[t * nq + q] = f(&frame.point);
        }
    }
    let mut shift = 0.0;
    if mesh.surface.is_closed() {
        let mut integral = 0.0;
        let mut total_area = 0.0;
        for t in 0..nt {
            for (q, node) in DEGREE4.iter().enumerate() {
                integral += 2.0 * areas[t] * node.weight * values[t * nq + q];
            }
            total_area += areas[t];
        }
        shift = integral / total_area;
    }
    let mut rhs = vec![0.0f64; mesh.vertex_count()];
    for t in 0..nt {
        let idx = mesh.triangles[t];
        for (q, node) in DEGREE4.iter().enumerate() {
            let fh = values[t * nq + q] - shift;
            let hats = hat_values(node.theta);
            for a in 0..3 {
                rhs[idx[a]] += 2.0 * areas[t] * node.weight * fh * hats[a];
            }
        }
    }
    Ok(rhs)
}

/// Lumped mass per vertex: one third of the incident flat area.
pub fn lumped_mass(mesh: &SurfaceMesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.vertex_count()];
    for t in 0..mesh.triangle_count() {
        let third = mesh.flat_area_of(t) / 3.0;
        for &v in &mesh.triangles[t] {
            m[v] += third;
        }
    }
    m
}

/// Assemble the constrained system for a mesh: mean-zero on closed surfaces,
/// homogeneous Dirichlet elimination on surfaces with boundary.
pub fn assemble_system(
    mesh: &SurfaceMesh,
    f: impl Fn(&Point3<f64>) -> f64,
) -> Result<SparseSystem> {
    let stiffness = assemble_stiffness(mesh)?;
    let rhs = assemble_load(mesh, f)?;
    if mesh.surface.is_closed() {
        return Ok(SparseSystem {
            matrix: stiffness,
            rhs,
            constraint: Constraint::MeanZero { lumped_mass: lumped_mass(mesh) },
        });
    }
    // symmetric elimination of boundary dofs (zero boundary values)
    let full_n = mesh.vertex_count();
    let mut map = vec![None; full_n];
    let mut reduced_n = 0u32;
    for v in 0..full_n {
        if !mesh.boundary_vertex[v] {
            map[v] = Some(reduced_n);
            reduced_n += 1;
        }
    }
    let fixed = mesh.boundary_vertices();
    let mut triplets = Vec::with_capacity(stiffness.nnz());
    for i in 0..full_n {
        let Some(ri) = map[i] else { continue };
        for k in stiffness.row_ptr[i]..stiffness.row_ptr[i + 1] {
            let j = stiffness.col_idx[k] as usize;
            if let Some(rj) = map[j] {
                triplets.push((ri, rj, stiffness.values[k]));
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(reduced_n as usize, triplets);
    let reduced_rhs: Vec<f64> =
        (0..full_n).filter(|&v| map[v].is_some()).map(|v| rhs[v]).collect();
    Ok(SparseSystem {
        matrix,
        rhs: reduced_rhs,
        constraint: Constraint::DirichletOnBoundary { fixed, map, full_n },
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradient with Jacobi preconditioner. In the mean-zero case
/// every preconditioned residual is projected back onto the complement of
/// the constant vector, and the returned coefficients carry lumped-mass zero
/// average. Dirichlet systems are solved in the reduced space and expanded
/// with zero boundary values.
pub fn solve(system: &SparseSystem, tol: f64, max_iter: usize) -> Result<SolveReport> {
    let start = Instant::now();
    let a = &system.matrix;
    let n = a.n;
    let mean_zero = matches!(system.constraint, Constraint::MeanZero { .. });
    let project = |v: &mut Vec<f64>| {
        if mean_zero {
            let mean = v.iter().sum::<f64>() / n as f64;
            for x in v.iter_mut() {
                *x -= mean;
            }
        }
    };
    let mut b = system.rhs.clone();
    project(&mut b);
    let b_norm = norm(&b);
    let mut x = vec![0.0; n];
    let mut iterations = 0usize;
    let mut rel_residual = 0.0;
    if b_norm > 0.0 {
        let diag = a.diagonal();
        for (i, d) in diag.iter().enumerate() {
            if *d <= 0.0 {
                return Err(Error::Invalid(format!("nonpositive diagonal at dof {i}: {d}")));
            }
        }
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
        project(&mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        loop {
            rel_residual = norm(&r) / b_norm;
            if rel_residual <= tol {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::MaxIterExceeded { iterations, residual: rel_residual });
            }
            a.matvec(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            project(&mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
    }
    let mut coefficients = x;
    finalize(&system.constraint, &mut coefficients);
    Ok(SolveReport {
        coefficients,
        cg_iterations: iterations,
        residual: rel_residual,
        dof_count: n,
        h: 0.0,
        psi_h: None,
        lambda_h: None,
        errors: None,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Expand reduced coefficients to the full vertex set and apply the
/// discrete zero-average normalization.
fn finalize(constraint: &Constraint, coefficients: &mut Vec<f64>) {
    match constraint {
        Constraint::MeanZero { lumped_mass } => {
            let total: f64 = lumped_mass.iter().sum();
            let mean =
                coefficients.iter().zip(lumped_mass).map(|(c, m)| c * m).sum::<f64>() / total;
            for c in coefficients.iter_mut() {
                *c -= mean;
            }
        }
        Constraint::DirichletOnBoundary { map, full_n, .. } => {
            let reduced = std::mem::take(coefficients);
            let mut full = vec![0.0; *full_n];
            for (v, slot) in map.iter().enumerate() {
                if let Some(r) = slot {
                    full[v] = reduced[*r as usize];
                }
            }
            *coefficients = full;
        }
    }
}

/// The verification fixture on the unit sphere: `u = xyz` restricted to the
/// sphere satisfies `-Delta_Gamma u = 12 u` and has zero mean by symmetry.
pub fn sphere_eigenfunction(p: &Point3<f64>) -> f64 {
    p.x * p.y * p.z
}

pub fn sphere_eigenfunction_rhs(p: &Point3<f64>) -> f64 {
    12.0 * p.x * p.y * p.z
}

/// Tangential gradient of `xyz` on the unit sphere.
pub fn sphere_eigenfunction_gradient(p: &Point3<f64>) -> Vector3<f64> {
    let g = Vector3::new(p.y * p.z, p.x * p.z, p.x * p.y);
    let nu = p.coords / p.coords.norm();
    g - nu * g.dot(&nu)
}
