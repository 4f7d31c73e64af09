//! `gpbox`: batch runs of the ground-state, spectral, certification, synthesis,
//! simulation, steering and physical-export stages.
//!
//! Exit codes: 0 ok, 2 invalid input or domain error, 3 certification failure,
//! 4 steering failure, 1 anything else (I/O).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{run, Failure};
use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "gpbox", version, about = "Bilinear control of a condensate in a moving box")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized targets (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand, PartialEq, Eq)]
pub enum Command {
    /// Ground state samples, mass, convexity slope and κ.
    Ground,
    /// Eigenvalues and control coefficients of the linearized operator.
    Spectrum,
    /// Sign changes of G_n over a μ grid.
    Scan,
    /// Genericity certificate at μ.
    Certify,
    /// Linearized control for a target perturbation.
    Synth,
    /// Nonlinear propagation of the ground state under a control file.
    Simulate,
    /// Newton steering to a target state.
    Steer,
    /// Box length trajectory and physical wave function for a control file.
    Physical,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> Result<(), Failure> {
        let mut cfg = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => return Err(Failure::Input("--config is required".into())),
        };
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.out = Some(out.clone());
        }
        if let Some(n) = cli.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
        }
        run(cli.command, &cfg)
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gpbox: {f}");
            ExitCode::from(f.code())
        }
    }
}
