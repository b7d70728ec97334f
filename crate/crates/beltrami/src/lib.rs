//! Piecewise-linear finite elements for `-Delta_Gamma u = f` on triangulated
//! surfaces embedded in R^3, with curvature-graded mesh refinement.
//!
//! The library is organized around six pieces:
//!
//! - [`surface`]: analytic surface descriptors (sphere, torus, graphs, the
//!   high-curvature ridge) and pointwise differential geometry: closest
//!   point, signed distance, normals, shape operator, curvature sampling.
//! - [`mesh`]: conforming surface triangle meshes with all vertices on the
//!   surface, initial mesh builders, uniform refinement and conforming
//!   longest-edge bisection, per-triangle geometric statistics.
//! - [`lift`]: everything connecting the polyhedral mesh to the smooth
//!   surface: metric tensors, the area ratio `delta_T`, the gradient
//!   transport matrices `Q` and `R`, lifted L2/H1 norms, and the global
//!   geometric indicators `Psi_h` and `Lambda_h`.
//! - [`fem`]: P1 stiffness/load assembly, the mean-zero and Dirichlet
//!   constraint handling, and a Jacobi-preconditioned conjugate gradient
//!   solver.
//! - [`grading`]: the curvature-graded refinement strategy: transition
//!   width, distance proxy, marking criteria, and the mark-and-bisect loop.
//! - [`experiments`]: reproducible experiment drivers (sphere convergence
//!   study, the graded ridge experiment) plus CSV/VTK/OFF output.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `beltrami` binary for a thin command-line front end.

pub mod config;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod grading;
pub mod io;
pub mod lift;
pub mod mesh;
pub mod quadrature;
pub mod surface;

pub use error::{Error, Result};
pub use mesh::SurfaceMesh;
pub use surface::{PointFrame, Surface};
