//! Command-line front end: one verb per experiment, all parameters from a
//! config file with a few common overrides.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beltrami::config::{ConfigMap, ExperimentConfig};
use beltrami::experiments;

#[derive(Parser)]
#[command(name = "beltrami", version, about = "Surface FEM for the Laplace-Beltrami operator with curvature-graded meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file (flat key-value with sections; see README)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Refinement levels (overrides mesh.levels)
    #[arg(long)]
    levels: Option<usize>,
    /// Enable grading (overrides grading.enabled)
    #[arg(long)]
    graded: bool,
    /// Enable the L2-mode criterion M4 (overrides grading.include_m4)
    #[arg(long)]
    m4: bool,
    /// Poincare-constant surrogate (overrides grading.cp)
    #[arg(long)]
    cp: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem once and write solution artifacts
    Solve(Common),
    /// Run the sphere convergence study
    Converge(Common),
    /// Grade the configured mesh and write the report
    Grade(Common),
    /// Run the full ridge experiment (reference, graded vs uniform)
    Ridge(Common),
    /// Export the configured mesh without solving
    Export(Common),
}

fn load_config(common: &Common) -> beltrami::Result<ExperimentConfig> {
    let mut map = match &common.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::default(),
    };
    if let Some(out) = &common.out {
        map.set("output.directory", out.display());
    }
    if let Some(levels) = common.levels {
        map.set("mesh.levels", levels);
    }
    if common.graded {
        map.set("grading.enabled", "true");
    }
    if common.m4 {
        map.set("grading.include_m4", "true");
    }
    if let Some(cp) = common.cp {
        map.set("grading.cp", cp);
    }
    ExperimentConfig::from_map(map)
}

fn run(cli: Cli) -> beltrami::Result<()> {
    match cli.command {
        Command::Solve(common) => {
            let cfg = load_config(&common)?;
            let dir = PathBuf::from(&cfg.out_dir);
            let report = experiments::run_solve(&cfg, &dir)?;
            println!(
                "solved {} dofs in {} CG iterations (residual {:.3e})",
                report.dof_count, report.cg_iterations, report.residual
            );
            if let Some((l2, h1)) = report.errors {
                println!("errors: L2 = {l2:.6e}, H1 = {h1:.6e}");
            }
            println!("artifacts in {}", dir.display());
        }
        Command::Converge(common) => {
            let cfg = load_config(&common)?;
            let dir = PathBuf::from(&cfg.out_dir);
            let table = experiments::run_sphere_convergence(&cfg)?;
            experiments::write_convergence_artifacts(&dir, &cfg, &table)?;
            print!("{}", table.to_csv());
            println!("artifacts in {}", dir.display());
        }
        Command::Grade(common) => {
            let cfg = load_config(&common)?;
            let dir = PathBuf::from(&cfg.out_dir);
            let report = experiments::run_grade(&cfg, &dir)?;
            println!(
                "graded in {} sweeps (d1 = {:.6}, Psi_h = {:.3e}, Lambda_h = {:.3e})",
                report.sweeps, report.d1, report.psi_h, report.lambda_h
            );
            println!("artifacts in {}", dir.display());
        }
        Command::Ridge(common) => {
            let cfg = load_config(&common)?;
            let dir = PathBuf::from(&cfg.out_dir);
            let outcome = experiments::run_ridge(&cfg)?;
            println!(
                "curvatures: kappa1 = {:.3}, kappa2 = {:.3}, ratio = {:.3}",
                outcome.kappa1, outcome.kappa2, outcome.kappa_ratio
            );
            println!("transition width d1 = {:.6}, h1 = {:.6}", outcome.d1, outcome.h1);
            println!(
                "reference: {} rings, {} triangles, {} dofs",
                outcome.reference_rings, outcome.reference_triangles, outcome.reference_dofs
            );
            for study in [&outcome.graded, &outcome.uniform] {
                println!(
                    "{:>8}: {} triangles, {} dofs, H1 error {:.6e}, D1 share {:.4}",
                    study.label, study.triangles, study.dofs, study.h1_error, study.d1_share
                );
            }
            experiments::write_ridge_artifacts(&dir, &cfg, &outcome)?;
            println!("artifacts in {}", dir.display());
        }
        Command::Export(common) => {
            let cfg = load_config(&common)?;
            let dir = PathBuf::from(&cfg.out_dir);
            experiments::run_export(&cfg, &dir)?;
            println!("artifacts in {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
