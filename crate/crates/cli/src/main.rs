//! Command-line driver: compatibility checks, immersion solves, catalog
//! listing, and field export. Exit codes: 0 success, 1 mathematical failure
//! (residuals or verification out of tolerance), 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use framefield_core::config::RunConfig;
use framefield_core::error::Error;
use framefield_core::run::{cmd_catalog, cmd_check, cmd_export, cmd_solve, Outcome};

#[derive(Parser)]
#[command(
    name = "framefield",
    about = "check compatibility systems and reconstruct structure-preserving immersions on sampled charts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration.
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the residual gate / check tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the Gauss/Ricci/Codazzi/torsion/inner-torsion residuals.
    Check(ConfigArgs),
    /// Integrate the frame equation and export the reconstructed immersion.
    Solve {
        #[command(flatten)]
        common: ConfigArgs,
        /// Integration substeps per grid edge.
        #[arg(long)]
        step_refine: Option<usize>,
        /// Solve even when the residual gate fails.
        #[arg(long)]
        force: bool,
    },
    /// List target models, structure variants, and fixtures.
    Catalog {
        /// Show one model family only.
        #[arg(long)]
        model: Option<String>,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// Sample the configured fixture's fields to grid files.
    Export(ConfigArgs),
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = args.tol {
        cfg.tolerances.residual_gate = tol;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = Some(out.clone());
    }
    Ok(cfg)
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::ShapeError(_) | Error::UnsupportedModel(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check(args) => {
            let cfg = match load_config(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match cmd_check(&cfg) {
                Ok(out) => {
                    print!("{}", out.report.render_text());
                    if let Some(p) = &out.report_path {
                        println!("report written to {}", p.display());
                    }
                    match out.outcome {
                        Outcome::Passed => {
                            println!("check passed (max residual {:.3e})", out.report.max_residual());
                            ExitCode::SUCCESS
                        }
                        Outcome::MathFailure => {
                            println!(
                                "check FAILED: family '{}' at {:.3e} exceeds {:.3e}",
                                out.report.worst_family(),
                                out.report.max_residual(),
                                cfg.tolerances.residual_gate
                            );
                            ExitCode::from(1)
                        }
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code_for(&e)
                }
            }
        }
        Command::Solve { common, step_refine, force } => {
            let mut cfg = match load_config(&common) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(sr) = step_refine {
                cfg.solve.step_refine = sr;
            }
            if force {
                cfg.solve.force = true;
            }
            match cmd_solve(&cfg) {
                Ok(out) => {
                    let d = &out.summary.diagnostics;
                    println!(
                        "solved {} nodes: pullback {:.3e}, alpha recovery {:.3e}, structure {:.3e}, holonomy {:.3e}",
                        out.summary.nodes,
                        d.verification.pullback_metric_max,
                        d.verification.alpha_recovery_max,
                        d.verification.structure_max,
                        d.holonomy_max
                    );
                    if let Some(e) = out.summary.exact_error {
                        println!("max error vs exact immersion: {e:.3e}");
                    }
                    for p in [&out.obj_path, &out.csv_path, &out.summary_path].into_iter().flatten() {
                        println!("wrote {}", p.display());
                    }
                    match out.outcome {
                        Outcome::Passed => ExitCode::SUCCESS,
                        Outcome::MathFailure => {
                            println!("solution verification FAILED");
                            ExitCode::from(1)
                        }
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code_for(&e)
                }
            }
        }
        Command::Catalog { model, json } => match cmd_catalog(model.as_deref(), json) {
            Ok(text) => {
                println!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Export(args) => {
            let cfg = match load_config(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match cmd_export(&cfg) {
                Ok(paths) => {
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code_for(&e)
                }
            }
        }
    }
}
