//! Reproducible experiment drivers: the sphere convergence study and the
//! graded-ridge experiment, plus their file artifacts.
//!
//! The ridge driver follows the workflow of the original experiment at desk
//! scale: measure the two region curvatures, build a reference solution on a
//! much finer uniform mesh, then compare a curvature-graded mesh against a
//! uniform mesh with a matched number of unknowns, both solved with zero
//! boundary values and the compactly supported bump right-hand side.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;



use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fem;
use crate::grading::{self, GradingConfig};
use crate::lift::{self, TriangleLift};
use crate::mesh::{build_initial_mesh, structured_disk, SurfaceMesh};
use crate::surface::{rhs_bump, Surface};
use crate::{io, quadrature};

/// One refinement level of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub level: usize,
    pub dofs: usize,
    pub h: f64,
    pub psi_h: f64,
    pub lambda_h: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    pub eoc_l2: Option<f64>,
    pub eoc_h1: Option<f64>,
    pub cg_iters: usize,
    /// Only populated when timings are enabled; kept out of the CSV
    /// otherwise so reruns are byte-identical.
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Append a row, computing its orders of convergence against the
    /// previous level: `EOC = log(e_prev / e) / log(h_prev / h)`.
    pub fn push(&mut self, mut row: ConvergenceRow) {
        if let Some(prev) = self.rows.last() {
            let dh = (prev.h / row.h).ln();
            if dh.abs() > 1e-300 {
                if prev.l2_error > 0.0 && row.l2_error > 0.0 {
                    row.eoc_l2 = Some((prev.l2_error / row.l2_error).ln() / dh);
                }
                if prev.h1_error > 0.0 && row.h1_error > 0.0 {
                    row.eoc_h1 = Some((prev.h1_error / row.h1_error).ln() / dh);
                }
            }
        }
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level,dofs,h,psi_h,lambda_h,l2_error,h1_error,eoc_l2,eoc_h1,cg_iters,wall_time\n",
        );
        for r in &self.rows {
            let eoc_l2 = r.eoc_l2.map(|v| v.to_string()).unwrap_or_default();
            let eoc_h1 = r.eoc_h1.map(|v| v.to_string()).unwrap_or_default();
            let wall = r.wall_time.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.level,
                r.dofs,
                r.h,
                r.psi_h,
                r.lambda_h,
                r.l2_error,
                r.h1_error,
                eoc_l2,
                eoc_h1,
                r.cg_iters,
                wall
            );
        }
        s
    }
}

fn sphere_surface(cfg: &ExperimentConfig) -> Result<Arc<Surface>> {
    if (cfg.sphere_radius - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(
            "the eigenfunction benchmark is calibrated for the unit sphere".into(),
        ));
    }
    Ok(Arc::new(Surface::sphere(1.0)))
}

/// Solve the eigenfunction benchmark over `levels` uniform refinements of
/// the initial sphere mesh and tabulate lifted errors.
pub fn run_sphere_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    let surface = sphere_surface(cfg)?;
    let mut mesh = build_initial_mesh(surface, cfg.target_h)?;
    let mut table = ConvergenceTable::default();
    for level in 0..cfg.levels {
        if level > 0 {
            mesh = mesh.refine_uniform()?;
        }
        let system = fem::assemble_system(&mesh, fem::sphere_eigenfunction_rhs)?;
        let max_iter = cfg.max_iter_factor * system.matrix.n;
        let report = fem::solve(&system, cfg.solver_tol, max_iter)?;
        let l2 =
            lift::lifted_l2_error(&mesh, &report.coefficients, fem::sphere_eigenfunction)?;
        let h1 = lift::lifted_h1_error(
            &mesh,
            &report.coefficients,
            fem::sphere_eigenfunction_gradient,
        )?;
        let (psi, lambda) = lift::global_indicators(&mesh)?;
        table.push(ConvergenceRow {
            level,
            dofs: report.dof_count,
            h: mesh.max_h(),
            psi_h: psi,
            lambda_h: lambda,
            l2_error: l2,
            h1_error: h1,
            eoc_l2: None,
            eoc_h1: None,
            cg_iters: report.cg_iterations,
            wall_time: cfg.timings.then_some(report.wall_time),
        });
    }
    if cfg.assert_budgets {
        assert_sphere_budgets(&table)?;
    }
    Ok(table)
}

/// The acceptance budgets for the sphere study: last-level EOCs near first
/// order in H1 and second order in L2.
pub fn assert_sphere_budgets(table: &ConvergenceTable) -> Result<()> {
    let last = table
        .rows
        .last()
        .ok_or_else(|| Error::Invalid("empty convergence table".into()))?;
    let eoc_h1 = last
        .eoc_h1
        .ok_or_else(|| Error::Invalid("need at least two levels for EOC".into()))?;
    let eoc_l2 = last.eoc_l2.unwrap();
    if !(0.85..=1.15).contains(&eoc_h1) {
        return Err(Error::Invalid(format!("H1 EOC {eoc_h1} outside [0.85, 1.15]")));
    }
    if !(1.8..=2.2).contains(&eoc_l2) {
        return Err(Error::Invalid(format!("L2 EOC {eoc_l2} outside [1.8, 2.2]")));
    }
    Ok(())
}

/// Outcome of one ridge study mesh (graded or uniform).
#[derive(Debug, Clone)]
pub struct StudyResult {
    pub label: String,
    pub mesh: SurfaceMesh,
    pub triangles: usize,
    pub dofs: usize,
    pub h_max: f64,
    pub h_min: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    /// Share of the squared H1 error carried by triangles within `d1` of
    /// the high-curvature region.
    pub d1_share: f64,
    pub cg_iters: usize,
    pub coefficients: Vec<f64>,
    pub error_density: Vec<f64>,
    pub in_d1: Vec<bool>,
}

/// Outcome of the full ridge experiment.
#[derive(Debug, Clone)]
pub struct RidgeOutcome {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_ratio: f64,
    pub d1: f64,
    pub h1: f64,
    pub f_max_quadrature: f64,
    pub reference_rings: usize,
    pub reference_triangles: usize,
    pub reference_dofs: usize,
    pub graded_sweeps: usize,
    pub graded: StudyResult,
    pub uniform: StudyResult,
}

/// Reference-solution evaluation at lifted points: locate the surface
/// parameters in the fine mesh's parameter-space triangulation.
pub struct ParamLocator {
    u0: f64,
    v0: f64,
    inv_du: f64,
    inv_dv: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<usize>,
    items: Vec<u32>,
}

impl ParamLocator {
    pub fn build(mesh: &SurfaceMesh) -> Result<ParamLocator> {
        let nt = mesh.triangle_count();
        let mut u_min = f64::INFINITY;
        let mut u_max = f64::NEG_INFINITY;
        let mut v_min = f64::INFINITY;
        let mut v_max = f64::NEG_INFINITY;
        let param = |v: usize| -> Result<[f64; 2]> {
            mesh.params[v].ok_or_else(|| {
                Error::Invalid("parameter-space point location needs vertex parameters".into())
            })
        };
        for v in 0..mesh.vertex_count() {
            let p = param(v)?;
            u_min = u_min.min(p[0]);
            u_max = u_max.max(p[0]);
            v_min = v_min.min(p[1]);
            v_max = v_max.max(p[1]);
        }
        let n = ((nt as f64 / 2.0).sqrt().ceil() as usize).clamp(1, 4096);
        let (nx, ny) = (n, n);
        let du = (u_max - u_min).max(1e-12);
        let dv = (v_max - v_min).max(1e-12);
        let cell_of = |u: f64, v: f64| -> (usize, usize) {
            let i = (((u - u_min) / du) * nx as f64).floor().clamp(0.0, nx as f64 - 1.0);
            let j = (((v - v_min) / dv) * ny as f64).floor().clamp(0.0, ny as f64 - 1.0);
            (i as usize, j as usize)
        };
        // two passes: counts then fill
        let mut counts = vec![0usize; nx * ny + 1];
        let mut spans = Vec::with_capacity(nt);
        for t in 0..nt {
            let [a, b, c] = mesh.triangles[t];
            let (pa, pb, pc) = (param(a)?, param(b)?, param(c)?);
            let lo_u = pa[0].min(pb[0]).min(pc[0]);
            let hi_u = pa[0].max(pb[0]).max(pc[0]);
            let lo_v = pa[1].min(pb[1]).min(pc[1]);
            let hi_v = pa[1].max(pb[1]).max(pc[1]);
            let (i0, j0) = cell_of(lo_u, lo_v);
            let (i1, j1) = cell_of(hi_u, hi_v);
            spans.push((i0, j0, i1, j1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    counts[j * nx + i + 1] += 1;
                }
            }
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut items = vec![0u32; offsets[nx * ny]];
        for (t, (i0, j0, i1, j1)) in spans.into_iter().enumerate() {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let cell = j * nx + i;
                    items[cursor[cell]] = t as u32;
                    cursor[cell] += 1;
                }
            }
        }
        Ok(ParamLocator {
            u0: u_min,
            v0: v_min,
            inv_du: nx as f64 / du,
            inv_dv: ny as f64 / dv,
            nx,
            ny,
            offsets,
            items,
        })
    }

    fn barycentric(mesh: &SurfaceMesh, t: usize, u: f64, v: f64) -> Option<[f64; 3]> {
        let [a, b, c] = mesh.triangles[t];
        let pa = mesh.params[a]?;
        let pb = mesh.params[b]?;
        let pc = mesh.params[c]?;
        let (d1u, d1v) = (pb[0] - pa[0], pb[1] - pa[1]);
        let (d2u, d2v) = (pc[0] - pa[0], pc[1] - pa[1]);
        let det = d1u * d2v - d1v * d2u;
        if det.abs() < 1e-30 {
            return None;
        }
        let (ru, rv) = (u - pa[0], v - pa[1]);
        let l1 = (ru * d2v - rv * d2u) / det;
        let l2 = (d1u * rv - d1v * ru) / det;
        Some([1.0 - l1 - l2, l1, l2])
    }

    /// Triangle containing (u, v) and its barycentric coordinates. Points
    /// epsilon-outside (the rim of a disk domain) fall back to the nearest
    /// candidate with clamped coordinates.
    pub fn locate(&self, mesh: &SurfaceMesh, u: f64, v: f64) -> Option<(usize, [f64; 3])> {
        let ci = (((u - self.u0) * self.inv_du).floor()).clamp(0.0, self.nx as f64 - 1.0) as usize;
        let cj = (((v - self.v0) * self.inv_dv).floor()).clamp(0.0, self.ny as f64 - 1.0) as usize;
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for ring in 0..=2usize {
            let i_lo = ci.saturating_sub(ring);
            let i_hi = (ci + ring).min(self.nx - 1);
            let j_lo = cj.saturating_sub(ring);
            let j_hi = (cj + ring).min(self.ny - 1);
            for j in j_lo..=j_hi {
                for i in i_lo..=i_hi {
                    let cell = j * self.nx + i;
                    for &t in &self.items[self.offsets[cell]..self.offsets[cell + 1]] {
                        let t = t as usize;
                        if let Some(l) = Self::barycentric(mesh, t, u, v) {
                            let defect = (-l[0]).max(-l[1]).max(-l[2]).max(0.0);
                            if defect <= 1e-10 {
                                return Some((t, l));
                            }
                            if best.map(|(d, _, _)| defect < d).unwrap_or(true) {
                                best = Some((defect, t, l));
                            }
                        }
                    }
                }
            }
            if let Some((defect, t, l)) = best {
                if ring >= 1 && defect < 0.25 {
                    let clamped = [l[0].max(0.0), l[1].max(0.0), l[2].max(0.0)];
                    let sum: f64 = clamped.iter().sum();
                    return Some((t, [clamped[0] / sum, clamped[1] / sum, clamped[2] / sum]));
                }
            }
        }
        None
    }
}

/// Evaluate one study mesh against the reference solution: lifted L2 and H1
/// errors, the per-triangle squared-H1-error density, and the share carried
/// inside the `d1` neighborhood of the high-curvature region.
fn measure_against_reference(
    label: &str,
    mesh: &SurfaceMesh,
    report: &fem::SolveReport,
    reference: &SurfaceMesh,
    ref_coeffs: &[f64],
    locator: &ParamLocator,
    d1: f64,
) -> Result<StudyResult> {
    // classify triangles by graph distance to Gamma_1
    let gamma1 = grading::gamma1_triangles(mesh, None)?;
    let rho = grading::distance_proxy(mesh, &gamma1)?;
    let in_d1: Vec<bool> = rho.iter().map(|&r| r <= d1).collect();

    let mut l2_sq = 0.0;
    let mut h1_sq = 0.0;
    let mut h1_sq_d1 = 0.0;
    let mut density = vec![0.0; mesh.triangle_count()];
    for t in 0..mesh.triangle_count() {
        let study = TriangleLift::compute(mesh, t)?;
        let coeffs = {
            let [a, b, c] = mesh.triangles[t];
            [report.coefficients[a], report.coefficients[b], report.coefficients[c]]
        };
        let g_study = study.flat_gradient(coeffs);
        let mut tri_h1 = 0.0;
        for node in &study.nodes {
            
            let params = node
                .frame
                .params
                .ok_or_else(|| Error::Invalid("graph frames carry parameters".into()))?;
            let (rt, bary) = locator.locate(reference, params[0], params[1]).ok_or_else(|| {
                Error::Invalid(format!(
                    "reference lookup failed at ({}, {})",
                    params[0], params[1]
                ))
            })?;
            // reference value and lifted gradient at the same surface point
            let [ra, rb, rc] = reference.triangles[rt];
            let u_ref = bary[0] * ref_coeffs[ra] + bary[1] * ref_coeffs[rb] + bary[2] * ref_coeffs[rc];
            let ref_lift = TriangleLift::compute_with_rule(
                reference,
                rt,
                &[quadrature::QuadNode { theta: [bary[1], bary[2]], weight: 0.5 }],
            )?;
            let g_ref_flat = ref_lift
                .flat_gradient([ref_coeffs[ra], ref_coeffs[rb], ref_coeffs[rc]]);
            let g_ref = ref_lift.nodes[0].r_matrix.transpose() * g_ref_flat;

            let u_h = study.value_at(coeffs, node.reference);
            let g_h = node.r_matrix.transpose() * g_study;
            let w = 2.0 * study.area * node.weight * node.delta;
            l2_sq += w * (u_ref - u_h) * (u_ref - u_h);
            let diff = (g_ref - g_h).norm_squared();
            h1_sq += w * diff;
            tri_h1 += w * diff;

        }
        density[t] = tri_h1 / study.area.max(1e-300);
        if in_d1[t] {
            h1_sq_d1 += tri_h1;
        }
    }
    Ok(StudyResult {
        label: label.to_string(),
        mesh: mesh.clone(),
        triangles: mesh.triangle_count(),
        dofs: report.dof_count,
        h_max: mesh.max_h(),
        h_min: mesh.min_h(),
        l2_error: l2_sq.sqrt(),
        h1_error: h1_sq.sqrt(),
        d1_share: if h1_sq > 0.0 { h1_sq_d1 / h1_sq } else { 0.0 },
        cg_iters: report.cg_iterations,
        coefficients: report.coefficients.clone(),
        error_density: density,
        in_d1,
    })
}

/// Interior (non-boundary) vertex count: the Dirichlet dof count.
fn interior_dofs(mesh: &SurfaceMesh) -> usize {
    mesh.boundary_vertex.iter().filter(|b| !**b).count()
}

/// Every quadrature node of every triangle admits the lift (normals agree
/// and `rho(dH) <= 1/2`).
pub fn lift_admissible(mesh: &SurfaceMesh) -> Result<()> {
    for t in 0..mesh.triangle_count() {
        TriangleLift::compute(mesh, t)?;
    }
    Ok(())
}

/// Bisect the few triangles whose quadrature nodes violate the standing
/// smallness assumption until the whole mesh admits the lift. On the ridge
/// this only touches triangles whose apex sits on the crest line.
pub fn repair_admissibility(mesh: &SurfaceMesh) -> Result<SurfaceMesh> {
    let mut current = mesh.clone();
    for _ in 0..50 {
        let mut bad = Vec::new();
        for t in 0..current.triangle_count() {
            if TriangleLift::compute(&current, t).is_err() {
                bad.push(t);
            }
        }
        if bad.is_empty() {
            return Ok(current);
        }
        current = current.bisect(&bad)?;
    }
    Err(Error::NonTermination { bound: 50 })
}

fn solve_on(mesh: &SurfaceMesh, cfg: &ExperimentConfig) -> Result<fem::SolveReport> {
    let system = fem::assemble_system(mesh, rhs_bump)?;
    let max_iter = cfg.max_iter_factor.max(1) * system.matrix.n;
    fem::solve(&system, cfg.solver_tol, max_iter)
}

/// The ridge experiment: curvature preflight, reference solution, graded and
/// dof-matched uniform studies, and region-wise error comparison.
pub fn run_ridge(cfg: &ExperimentConfig) -> Result<RidgeOutcome> {
    let surface = Arc::new(Surface::ridge());

    // curvature preflight over dense parameter grids
    let (kappa1, kappa2) = surface.region_curvature_maxima(2048)?;

    let grading_cfg = GradingConfig {
        c_p: cfg.c_p,
        kappa1,
        kappa2,
        h: cfg.grading_h,
        include_m4: cfg.include_m4,
        max_sweeps: cfg.max_sweeps,
        min_h: cfg.min_h,
        far_cap: cfg.far_cap,
        region: None,
    };
    let (d1, h1) = grading::transition_width(&grading_cfg);

    // graded study
    let initial = structured_disk(surface.clone(), cfg.ridge_rings)?;
    let (graded_mesh, graded_report) = grading::grade(&initial, &grading_cfg)?;
    lift_admissible(&graded_mesh)?;
    let graded_solve = solve_on(&graded_mesh, cfg)?;

    // right-hand-side preflight: the bump peaks at its center
    let mut f_max: f64 = 0.0;
    for t in 0..graded_mesh.triangle_count() {
        let lift = TriangleLift::compute(&graded_mesh, t)?;
        for node in &lift.nodes {
            f_max = f_max.max(rhs_bump(&node.frame.point));
        }
    }

    // dof-matched uniform study: pick the ring count whose interior dof
    // count is nearest the graded mesh's, then nudge outward if a lift
    // check rejects the mesh
    let target = interior_dofs(&graded_mesh);
    let base = (((target as f64) / 3.0).sqrt().round() as usize).max(2);
    let mut candidates: Vec<usize> = Vec::new();
    for delta in 0..6usize {
        candidates.push(base + delta);
        if base > delta + 1 {
            candidates.push(base - delta - 1);
        }
    }
    candidates.sort_by_key(|&k| {
        let dofs = interior_count_for_rings(k);
        (dofs as i64 - target as i64).abs()
    });
    let mut uniform_pick = None;
    for k in candidates {
        let dofs = interior_count_for_rings(k);
        let rel = (dofs as f64 - target as f64).abs() / target as f64;
        if rel > 0.10 {
            continue;
        }
        let mesh = repair_admissibility(&structured_disk(surface.clone(), k)?)?;
        let rel = (interior_dofs(&mesh) as f64 - target as f64).abs() / target as f64;
        if rel <= 0.10 {
            uniform_pick = Some((k, mesh));
            break;
        }
    }
    let (uniform_rings, uniform_mesh) = uniform_pick.ok_or_else(|| {
        Error::Invalid(format!(
            "no admissible uniform mesh within 10% of {target} dofs"
        ))
    })?;
    let uniform_solve = solve_on(&uniform_mesh, cfg)?;

    // reference: six uniform halvings finer than the matched uniform mesh
    let reference_rings = if cfg.reference_rings > 0 {
        cfg.reference_rings
    } else {
        64 * uniform_rings
    };
    let reference_mesh = structured_disk(surface.clone(), reference_rings)?;
    let reference_solve = solve_on(&reference_mesh, cfg)?;
    let locator = ParamLocator::build(&reference_mesh)?;

    let graded = measure_against_reference(
        "graded",
        &graded_mesh,
        &graded_solve,
        &reference_mesh,
        &reference_solve.coefficients,
        &locator,
        d1,
    )?;
    let uniform = measure_against_reference(
        "uniform",
        &uniform_mesh,
        &uniform_solve,
        &reference_mesh,
        &reference_solve.coefficients,
        &locator,
        d1,
    )?;

    let outcome = RidgeOutcome {
        kappa1,
        kappa2,
        kappa_ratio: kappa1 / kappa2,
        d1,
        h1,
        f_max_quadrature: f_max,
        reference_rings,
        reference_triangles: reference_mesh.triangle_count(),
        reference_dofs: reference_solve.dof_count,
        graded_sweeps: graded_report.sweeps,
        graded,
        uniform,
    };
    if cfg.assert_budgets {
        assert_ridge_budgets(&outcome)?;
    }
    Ok(outcome)
}

/// The acceptance budgets for the ridge experiment.
pub fn assert_ridge_budgets(outcome: &RidgeOutcome) -> Result<()> {
    let check = |name: &str, value: f64, expect: f64, rel: f64| -> Result<()> {
        if (value - expect).abs() > rel * expect {
            return Err(Error::Invalid(format!(
                "{name} = {value} deviates from {expect} by more than {:.2}%",
                rel * 100.0
            )));
        }
        Ok(())
    };
    check("kappa1", outcome.kappa1, 199.970, 0.005)?;
    check("kappa2", outcome.kappa2, 8.701, 0.005)?;
    check("kappa ratio", outcome.kappa_ratio, 22.984, 0.005)?;
    let dof_rel = (outcome.graded.dofs as f64 - outcome.uniform.dofs as f64).abs()
        / outcome.graded.dofs as f64;
    if dof_rel > 0.10 {
        return Err(Error::Invalid(format!("dof mismatch {dof_rel:.3} exceeds 10%")));
    }
    if outcome.graded.h1_error > outcome.uniform.h1_error {
        return Err(Error::Invalid(format!(
            "graded H1 error {} exceeds uniform {}",
            outcome.graded.h1_error, outcome.uniform.h1_error
        )));
    }
    if outcome.graded.d1_share >= outcome.uniform.d1_share {
        return Err(Error::Invalid(format!(
            "graded D1 error share {} not below uniform {}",
            outcome.graded.d1_share, outcome.uniform.d1_share
        )));
    }
    if outcome.f_max_quadrature > 50.0 * (-5.0f64).exp() + 1e-12 {
        return Err(Error::Invalid(format!(
            "assembled f exceeds its analytic maximum: {}",
            outcome.f_max_quadrature
        )));
    }
    Ok(())
}

fn interior_count_for_rings(k: usize) -> usize {
    // structured disk: 1 + 3k(k+1) vertices, 6k of them on the rim
    1 + 3 * k * (k + 1) - 6 * k
}

/// Write the per-study VTK artifacts: solution, squared-H1-error density,
/// per-triangle curvature bound, and the `D_1` membership flags.
pub fn write_ridge_artifacts(
    dir: &Path,
    cfg: &ExperimentConfig,
    outcome: &RidgeOutcome,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for study in [&outcome.graded, &outcome.uniform] {
        let mesh = &study.mesh;
        let kappa: Vec<f64> = (0..mesh.triangle_count())
            .map(|t| mesh.triangle_geometry(t).map(|g| g.kappa_t))
            .collect::<Result<_>>()?;
        let marked: Vec<f64> =
            study.in_d1.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let body = io::vtk_string_with_point_data(
            mesh,
            &[("solution", study.coefficients.as_slice())],
            &[
                ("grad_error_density", study.error_density.as_slice()),
                ("kappa_T", kappa.as_slice()),
                ("marked", marked.as_slice()),
            ],
        )?;
        std::fs::write(dir.join(format!("ridge_{}.vtk", study.label)), body)?;
        io::write_off(&dir.join(format!("ridge_{}.off", study.label)), mesh)?;
    }
    let mut rows = String::from(
        "study,triangles,dofs,h_max,h_min,l2_error,h1_error,d1_share,cg_iters\n",
    );
    for study in [&outcome.graded, &outcome.uniform] {
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{},{},{},{}",
            study.label,
            study.triangles,
            study.dofs,
            study.h_max,
            study.h_min,
            study.l2_error,
            study.h1_error,
            study.d1_share,
            study.cg_iters
        );
    }
    std::fs::write(dir.join("ridge_studies.csv"), rows)?;
    let indicators = vec![
        ("kappa1".to_string(), outcome.kappa1.to_string()),
        ("kappa2".to_string(), outcome.kappa2.to_string()),
        ("kappa_ratio".to_string(), outcome.kappa_ratio.to_string()),
        ("d1".to_string(), outcome.d1.to_string()),
        ("h1".to_string(), outcome.h1.to_string()),
        ("reference_rings".to_string(), outcome.reference_rings.to_string()),
        ("reference_triangles".to_string(), outcome.reference_triangles.to_string()),
        ("reference_dofs".to_string(), outcome.reference_dofs.to_string()),
        ("graded_h1_error".to_string(), outcome.graded.h1_error.to_string()),
        ("uniform_h1_error".to_string(), outcome.uniform.h1_error.to_string()),
        ("graded_d1_share".to_string(), outcome.graded.d1_share.to_string()),
        ("uniform_d1_share".to_string(), outcome.uniform.d1_share.to_string()),
    ];
    std::fs::write(dir.join("manifest.txt"), io::manifest_string(&cfg.echo, &indicators))?;
    Ok(())
}

/// Write convergence-study artifacts: the CSV table and a manifest.
pub fn write_convergence_artifacts(
    dir: &Path,
    cfg: &ExperimentConfig,
    table: &ConvergenceTable,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("convergence.csv"), table.to_csv())?;
    let mut indicators = Vec::new();
    if let Some(last) = table.rows.last() {
        indicators.push(("final_h".to_string(), last.h.to_string()));
        indicators.push(("final_l2_error".to_string(), last.l2_error.to_string()));
        indicators.push(("final_h1_error".to_string(), last.h1_error.to_string()));
        if let Some(e) = last.eoc_l2 {
            indicators.push(("final_eoc_l2".to_string(), e.to_string()));
        }
        if let Some(e) = last.eoc_h1 {
            indicators.push(("final_eoc_h1".to_string(), e.to_string()));
        }
    }
    std::fs::write(dir.join("manifest.txt"), io::manifest_string(&cfg.echo, &indicators))?;
    Ok(())
}

/// Resolve the configured surface.
pub fn surface_from_config(cfg: &ExperimentConfig) -> Result<Arc<Surface>> {
    match cfg.surface_kind.as_str() {
        "sphere" => Ok(Arc::new(Surface::sphere(cfg.sphere_radius))),
        "torus" => Ok(Arc::new(Surface::torus(cfg.torus_major, cfg.torus_minor))),
        "ridge" => Ok(Arc::new(Surface::ridge())),
        "plane" => Ok(Arc::new(Surface::plane(0.0, (-1.0, 1.0), (-1.0, 1.0)))),
        other => Err(Error::Invalid(format!("unknown surface kind `{other}`"))),
    }
}

/// Build (and optionally grade) the configured mesh.
pub fn mesh_from_config(cfg: &ExperimentConfig) -> Result<SurfaceMesh> {
    let surface = surface_from_config(cfg)?;
    let mesh = if matches!(&*surface, Surface::Graph { .. }) && cfg.surface_kind == "ridge" {
        structured_disk(surface.clone(), cfg.ridge_rings)?
    } else {
        build_initial_mesh(surface.clone(), cfg.target_h)?
    };
    if !cfg.graded {
        return Ok(mesh);
    }
    let (kappa1, kappa2) = match &*surface {
        Surface::Graph { .. } => surface.region_curvature_maxima(512)?,
        _ => (1.0 / cfg.sphere_radius, 1.0 / cfg.sphere_radius),
    };
    let gcfg = GradingConfig {
        c_p: cfg.c_p,
        kappa1,
        kappa2,
        h: cfg.grading_h,
        include_m4: cfg.include_m4,
        max_sweeps: cfg.max_sweeps,
        min_h: cfg.min_h,
        far_cap: cfg.far_cap,
        region: None,
    };
    let (graded, _) = grading::grade(&mesh, &gcfg)?;
    Ok(graded)
}

/// Solve the configured problem once and write solution artifacts.
pub fn run_solve(cfg: &ExperimentConfig, dir: &Path) -> Result<fem::SolveReport> {
    let mesh = mesh_from_config(cfg)?;
    let surface_closed = mesh.surface.is_closed();
    let (system, report, errors) = if surface_closed {
        let system = fem::assemble_system(&mesh, fem::sphere_eigenfunction_rhs)?;
        let mut report =
            fem::solve(&system, cfg.solver_tol, cfg.max_iter_factor * system.matrix.n)?;
        let l2 = lift::lifted_l2_error(&mesh, &report.coefficients, fem::sphere_eigenfunction)?;
        let h1 = lift::lifted_h1_error(
            &mesh,
            &report.coefficients,
            fem::sphere_eigenfunction_gradient,
        )?;
        report.errors = Some((l2, h1));
        let errors = report.errors;
        (system, report, errors)
    } else {
        let system = fem::assemble_system(&mesh, rhs_bump)?;
        let report =
            fem::solve(&system, cfg.solver_tol, cfg.max_iter_factor * system.matrix.n)?;
        (system, report, None)
    };
    std::fs::create_dir_all(dir)?;
    let body = io::vtk_string_with_point_data(
        &mesh,
        &[("solution", report.coefficients.as_slice())],
        &[],
    )?;
    std::fs::write(dir.join("solution.vtk"), body)?;
    io::write_off(&dir.join("mesh.off"), &mesh)?;
    io::write_matrix_market(&dir.join("stiffness.mtx"), &system.matrix)?;
    let mut indicators = vec![
        ("dofs".to_string(), report.dof_count.to_string()),
        ("h".to_string(), mesh.max_h().to_string()),
        ("cg_iterations".to_string(), report.cg_iterations.to_string()),
        ("residual".to_string(), report.residual.to_string()),
    ];
    if let Some((l2, h1)) = errors {
        indicators.push(("l2_error".to_string(), l2.to_string()));
        indicators.push(("h1_error".to_string(), h1.to_string()));
    }
    std::fs::write(dir.join("manifest.txt"), io::manifest_string(&cfg.echo, &indicators))?;
    Ok(report)
}

/// Export the configured mesh (no solve): OFF plus a VTK with per-triangle
/// kappa and h fields.
pub fn run_export(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mesh = mesh_from_config(cfg)?;
    std::fs::create_dir_all(dir)?;
    let mut kappa = Vec::with_capacity(mesh.triangle_count());
    let mut hs = Vec::with_capacity(mesh.triangle_count());
    for t in 0..mesh.triangle_count() {
        let g = mesh.triangle_geometry(t)?;
        kappa.push(g.kappa_t);
        hs.push(g.h_t);
    }
    io::write_vtk(
        &dir.join("mesh.vtk"),
        &mesh,
        &[("kappa_T", kappa.as_slice()), ("h_T", hs.as_slice())],
    )?;
    io::write_off(&dir.join("mesh.off"), &mesh)?;
    std::fs::write(
        dir.join("manifest.txt"),
        io::manifest_string(
            &cfg.echo,
            &[
                ("triangles".to_string(), mesh.triangle_count().to_string()),
                ("vertices".to_string(), mesh.vertex_count().to_string()),
                ("h".to_string(), mesh.max_h().to_string()),
            ],
        ),
    )?;
    Ok(())
}

/// Grade the configured mesh and write the report artifacts.
pub fn run_grade(cfg: &ExperimentConfig, dir: &Path) -> Result<grading::GradingReport> {
    let surface = surface_from_config(cfg)?;
    let mesh = if cfg.surface_kind == "ridge" {
        structured_disk(surface.clone(), cfg.ridge_rings)?
    } else {
        build_initial_mesh(surface.clone(), cfg.target_h)?
    };
    let (kappa1, kappa2) = surface.region_curvature_maxima(1024)?;
    let gcfg = GradingConfig {
        c_p: cfg.c_p,
        kappa1,
        kappa2,
        h: cfg.grading_h,
        include_m4: cfg.include_m4,
        max_sweeps: cfg.max_sweeps,
        min_h: cfg.min_h,
        far_cap: cfg.far_cap,
        region: None,
    };
    let (graded, report) = grading::grade(&mesh, &gcfg)?;
    std::fs::create_dir_all(dir)?;
    let gamma1 = grading::gamma1_triangles(&graded, None)?;
    let rho = grading::distance_proxy(&graded, &gamma1)?;
    let marked: Vec<f64> = rho.iter().map(|&r| if r <= report.d1 { 1.0 } else { 0.0 }).collect();
    io::write_vtk(&dir.join("graded.vtk"), &graded, &[("marked", marked.as_slice())])?;
    io::write_off(&dir.join("graded.off"), &graded)?;
    // sensitivity of the transition width to c_p
    let half = GradingConfig { c_p: cfg.c_p / 2.0, ..gcfg.clone() };
    let double = GradingConfig { c_p: cfg.c_p * 2.0, ..gcfg.clone() };
    let (d1_half, _) = grading::transition_width(&half);
    let (d1_double, _) = grading::transition_width(&double);
    let mut csv = String::from("sweep,marked\n");
    for (i, m) in report.marked_per_sweep.iter().enumerate() {
        let _ = writeln!(csv, "{i},{m}");
    }
    std::fs::write(dir.join("grading_sweeps.csv"), csv)?;
    let indicators = vec![
        ("sweeps".to_string(), report.sweeps.to_string()),
        ("d1".to_string(), report.d1.to_string()),
        ("d1_at_half_cp".to_string(), d1_half.to_string()),
        ("d1_at_double_cp".to_string(), d1_double.to_string()),
        ("h1".to_string(), report.h1.to_string()),
        ("psi_h".to_string(), report.psi_h.to_string()),
        ("lambda_h".to_string(), report.lambda_h.to_string()),
        ("class1_triangles".to_string(), report.class1_triangles.to_string()),
        ("class2_triangles".to_string(), report.class2_triangles.to_string()),
        ("triangles".to_string(), graded.triangle_count().to_string()),
    ];
    std::fs::write(dir.join("manifest.txt"), io::manifest_string(&cfg.echo, &indicators))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigMap;

    fn test_cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_map(ConfigMap::parse(text).unwrap()).unwrap()
    }

    #[test]
    fn eoc_definition() {
        let mut table = ConvergenceTable::default();
        table.push(ConvergenceRow {
            level: 0,
            dofs: 10,
            h: 0.2,
            psi_h: 0.0,
            lambda_h: 0.0,
            l2_error: 4e-2,
            h1_error: 2e-1,
            eoc_l2: None,
            eoc_h1: None,
            cg_iters: 5,
            wall_time: None,
        });
        table.push(ConvergenceRow {
            level: 1,
            dofs: 40,
            h: 0.1,
            psi_h: 0.0,
            lambda_h: 0.0,
            l2_error: 1e-2,
            h1_error: 1e-1,
            eoc_l2: None,
            eoc_h1: None,
            cg_iters: 9,
            wall_time: None,
        });
        let r = &table.rows[1];
        assert!((r.eoc_l2.unwrap() - 2.0).abs() < 1e-12);
        assert!((r.eoc_h1.unwrap() - 1.0).abs() < 1e-12);
        let csv = table.to_csv();
        assert!(csv.starts_with(
            "level,dofs,h,psi_h,lambda_h,l2_error,h1_error,eoc_l2,eoc_h1,cg_iters,wall_time\n"
        ));
        // first row has empty EOC cells
        assert!(csv.lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn zero_rhs_run_has_tiny_errors() {
        // solving with f = 0 on the sphere gives the zero solution and zero
        // errors against the zero exact field
        let cfg = test_cfg("[mesh]\ntarget_h = 0.6\n");
        let surface = sphere_surface(&cfg).unwrap();
        let mesh = build_initial_mesh(surface, cfg.target_h).unwrap();
        let system = fem::assemble_system(&mesh, |_| 0.0).unwrap();
        let report = fem::solve(&system, 1e-10, 1000).unwrap();
        let l2 = lift::lifted_l2_error(&mesh, &report.coefficients, |_| 0.0).unwrap();
        let h1 = lift::lifted_h1_error(&mesh, &report.coefficients, |_| {
            nalgebra::Vector3::zeros()
        })
        .unwrap();
        assert!(l2 <= 1e-10 && h1 <= 1e-10);
    }

    #[test]
    fn sphere_convergence_small_run() {
        let cfg = test_cfg("[mesh]\ntarget_h = 0.6\nlevels = 3\n[run]\nassert_budgets = false\n");
        let table = run_sphere_convergence(&cfg).unwrap();
        assert_eq!(table.rows.len(), 3);
        // errors decrease monotonically
        for w in table.rows.windows(2) {
            assert!(w[1].l2_error < w[0].l2_error);
            assert!(w[1].h1_error < w[0].h1_error);
        }
    }

    #[test]
    fn locator_finds_containing_triangles() {
        let surface = Arc::new(Surface::ridge());
        let mesh = structured_disk(surface, 8).unwrap();
        let locator = ParamLocator::build(&mesh).unwrap();
        for (u, v) in [(0.0, 0.0), (0.3, -0.2), (-0.7, 0.1), (0.05, 0.62)] {
            let (t, bary) = locator.locate(&mesh, u, v).unwrap();
            assert!(t < mesh.triangle_count());
            let [a, b, c] = mesh.triangles[t];
            let pa = mesh.params[a].unwrap();
            let pb = mesh.params[b].unwrap();
            let pc = mesh.params[c].unwrap();
            let ru = bary[0] * pa[0] + bary[1] * pb[0] + bary[2] * pc[0];
            let rv = bary[0] * pa[1] + bary[1] * pb[1] + bary[2] * pc[1];
            assert!((ru - u).abs() < 1e-9 && (rv - v).abs() < 1e-9);
        }
        // a point just outside the rim clamps to a boundary triangle
        let (t, bary) = locator.locate(&mesh, 1.0 + 1e-6, 0.0).unwrap();
        assert!(t < mesh.triangle_count());
        assert!(bary.iter().all(|&l| l >= 0.0));
    }
}
