//! `platelab`: configuration-driven thin-plate experiments.
//!
//! Exit status: 0 success, 1 a pass/fail flag failed, 2 usage or
//! configuration error, 3 numerical failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use platelab::fem3d::{assemble, solve_with_stats, stationarity_residual, total_energy};
use platelab::harness::run_sweep;
use platelab::inertia::inertia_table;
use platelab::material::KappaEnergyParams;
use platelab::scaling::load_sequence;
use platelab::Error;
use serde_json::json;

use config::{ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "platelab",
    version,
    about = "Thin-plate dimension-reduction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing (overrides `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `kappa`.
    #[arg(long)]
    kappa: Option<f64>,
    /// Suppresses the summary on standard output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solves the plate problem at one thickness.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Overrides `epsilon`.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Runs the thickness sweep and the recipe checklist.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Tabulates the inertial workings along the inertia ladder.
    Inertia {
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Acceptance(String),
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidMaterial(_)
            | Error::InvalidParameter { .. }
            | Error::InvalidMesh(_)
            | Error::MeshMismatch(_)
            | Error::IndefiniteEnergy { .. } => Failure::Config(e.to_string()),
            Error::Singular(_) | Error::NotConverged { .. } => Failure::Numerical(e.to_string()),
        }
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Config(format!("cannot write {}: {e}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io(&path))
}

/// Loads, overrides, resolves and validates the configuration, creates the
/// output directory and writes the echo.
fn prepare(common: &Common, epsilon: Option<f64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(k) = common.kappa {
        cfg.kappa = k;
    }
    if let Some(e) = epsilon {
        cfg.epsilon = Some(e);
    }
    if let Some(o) = &common.out {
        cfg.output = o.clone();
    }
    cfg.resolve();
    cfg.validate()?;
    fs::create_dir_all(&cfg.output).map_err(io(&cfg.output))?;
    let echo = serde_json::to_string_pretty(&cfg).expect("config serializes");
    write(&cfg.output, "config.json", &echo)?;
    Ok(cfg)
}

fn cmd_solve(common: &Common, epsilon: Option<f64>) -> Result<(), Failure> {
    let cfg = prepare(common, epsilon)?;
    let family = cfg.geometry;
    let eps = cfg.epsilon.expect("resolved");
    let params = KappaEnergyParams::new(cfg.kappa, eps, family.epsilon_r())?;
    let mesh = Arc::new(family.mesh_at(eps, cfg.mesh.nx, cfg.mesh.ny, cfg.mesh.nz)?);
    // premultiplying by epsilon^{-2 beta} amounts to the load b / epsilon^beta
    let load = load_sequence(&cfg.load, &family, eps)?.scaled(eps.powf(-cfg.beta));
    let system = assemble(
        mesh,
        &cfg.material()?,
        &params,
        &move |x| load.eval(x),
        cfg.formulation,
    )?;
    let (field, stats) = solve_with_stats(&system, &cfg.solver)?;
    let residual = stationarity_residual(&system, &field);
    let energy = total_energy(&system, &field);
    write(&cfg.output, "field.csv", &field.to_csv())?;
    let summary = json!({
        "epsilon": eps,
        "kappa": cfg.kappa,
        "beta": cfg.beta,
        "dofs": system.dofs(),
        "free_dofs": system.free_count(),
        "energy": energy,
        "relative_residual": residual,
        "solver": stats,
    });
    write(
        &cfg.output,
        "summary.json",
        &serde_json::to_string_pretty(&summary).expect("json"),
    )?;
    if !common.quiet {
        println!(
            "epsilon = {eps}, kappa = {}: energy {energy:.12e}, relative residual {residual:.3e}",
            cfg.kappa
        );
        println!("wrote {}", cfg.output.join("field.csv").display());
    }
    Ok(())
}

fn cmd_sweep(common: &Common) -> Result<(), Failure> {
    let cfg = prepare(common, None)?;
    let report = run_sweep(&cfg.sweep_config()?)?;
    write(&cfg.output, "report.csv", &report.to_csv())?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&cfg.output, "report.json", &json)?;
    if !common.quiet {
        print!("{}", report.to_csv());
        for c in &report.checks {
            println!(
                "[{}] {}: {}",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
    }
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Acceptance(format!(
            "failed checks: {}",
            failed.join("; ")
        )))
    }
}

fn cmd_inertia(common: &Common) -> Result<(), Failure> {
    let cfg = prepare(common, None)?;
    let ladder = cfg.inertia.ladder.clone().expect("resolved");
    let table = inertia_table(cfg.geometry, cfg.mesh, &cfg.inertia.profile(), &ladder)?;
    write(&cfg.output, "inertia.csv", &table)?;
    if !common.quiet {
        print!("{table}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Solve { common, epsilon } => cmd_solve(common, *epsilon),
        Command::Sweep { common } => cmd_sweep(common),
        Command::Inertia { common } => cmd_inertia(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Acceptance(m)) => {
            eprintln!("platelab: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("platelab: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("platelab: numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
