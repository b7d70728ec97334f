//! Convergence study for the eigenfunction benchmark on the unit sphere:
//! u = xyz solves -Delta_Gamma u = 12 xyz, so lifted errors against the
//! analytic solution expose the discretization orders (H1 ~ h, L2 ~ h^2).
//!
//! ```bash
//! cargo run --release --example sphere_convergence
//! ```

use beltrami::config::{ConfigMap, ExperimentConfig};
use beltrami::experiments::run_sphere_convergence;

fn main() -> beltrami::Result<()> {
    let map = ConfigMap::parse(
        "[mesh]\ntarget_h = 0.6\nlevels = 5\n[run]\nassert_budgets = true\n",
    )?;
    let cfg = ExperimentConfig::from_map(map)?;
    let table = run_sphere_convergence(&cfg)?;
    println!(
        "{:>5} {:>8} {:>10} {:>12} {:>12} {:>8} {:>8} {:>6}",
        "level", "dofs", "h", "L2 error", "H1 error", "EOC L2", "EOC H1", "CG"
    );
    for r in &table.rows {
        println!(
            "{:>5} {:>8} {:>10.5} {:>12.4e} {:>12.4e} {:>8} {:>8} {:>6}",
            r.level,
            r.dofs,
            r.h,
            r.l2_error,
            r.h1_error,
            r.eoc_l2.map(|v| format!("{v:.3}")).unwrap_or_default(),
            r.eoc_h1.map(|v| format!("{v:.3}")).unwrap_or_default(),
            r.cg_iters,
        );
    }
    Ok(())
}
