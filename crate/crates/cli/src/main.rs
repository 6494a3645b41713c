//! Command-line runner for adaptive runs, invariant suites and mesh inspection.

mod config;

use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hodgefem::adaptivity::{run, RunOptions, StopReason};
use hodgefem::diagnostics::{run_all, DiagnoseConfig};
use hodgefem::problems::by_name;
use hodgefem::report::write_artifacts;
use hodgefem::{HodgeError, Mesh64};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(#[from] HodgeError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hodgefem",
    version,
    about = "Adaptive mixed finite elements for the Hodge Laplacian"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an adaptive or uniform experiment and write its reports.
    Run { config: PathBuf },
    /// Run every invariant suite and print a pass/fail table.
    Diagnose { config: Option<PathBuf> },
    /// Validate a mesh file and print its metrics.
    MeshDump { mesh: PathBuf },
}

fn read_config(path: &PathBuf) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

fn cmd_run(path: &PathBuf) -> Result<u8, CliError> {
    let cfg = read_config(path)?;
    let problem = by_name::<f64>(&cfg.problem)?;
    let options = RunOptions {
        timing: cfg.timing,
        ..Default::default()
    };
    let out = run(problem, cfg.algorithm, cfg.params.clone(), options)?;
    let mesh = out.meshes.last().expect("at least one step");
    write_artifacts(&cfg.output_dir, &out.report, mesh, cfg.emit_svg)?;
    let r = &out.report;
    let last = r.steps.last().expect("at least one step");
    println!(
        "{} {:?}: {} steps, {} triangles, eta {:.6e}, stop {:?}, rate {}",
        r.problem,
        r.algorithm,
        r.steps.len(),
        last.ntri,
        last.eta,
        r.stop,
        r.fitted_rate
            .map(|s| format!("{s:.4}"))
            .unwrap_or_else(|| "n/a".into())
    );
    Ok(if r.stop == StopReason::Tolerance {
        0
    } else {
        1
    })
}

fn cmd_diagnose(path: Option<&PathBuf>) -> Result<u8, CliError> {
    let seed = match path {
        Some(p) => read_config(p)?.seed,
        None => RunConfig::default().seed,
    };
    let results = run_all(&DiagnoseConfig {
        seed,
        ..Default::default()
    });
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{} {:<width$}  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name.as_str())
        .collect();
    if failed.is_empty() {
        println!("all {} suites passed", results.len());
        Ok(0)
    } else {
        println!("failed: {}", failed.join(", "));
        Ok(1)
    }
}

fn cmd_mesh_dump(path: &PathBuf) -> Result<u8, CliError> {
    let file =
        fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mesh = Mesh64::read(BufReader::new(file)).map_err(|e| CliError::Config(e.to_string()))?;
    let m = mesh.metrics();
    println!(
        "{}",
        serde_json::to_string_pretty(&m).expect("metrics serialize")
    );
    Ok(0)
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("HODGEFEM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Diagnose { config } => cmd_diagnose(config.as_ref()),
        Command::MeshDump { mesh } => cmd_mesh_dump(mesh),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
