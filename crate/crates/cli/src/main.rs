//! Command-line front end: every run is driven by one TOML config file.

mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use commands::Status;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bernoulli",
    version,
    about = "Discrete one-phase free boundary laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solvers, write fields, energies and the certificate.
    Solve { config: PathBuf },
    /// Diagnose a field written by `solve`.
    Diagnose { config: PathBuf, field: PathBuf },
    /// Compare the solvers with brute-force enumeration.
    Oracle { config: PathBuf },
    /// Rescale a minimizer around a point; solves first unless a field is given.
    Blowup {
        config: PathBuf,
        field: Option<PathBuf>,
    },
    /// Export the mesh as JSON.
    Mesh { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { config } => commands::cmd_solve(config),
        Command::Diagnose { config, field } => commands::cmd_diagnose(config, field),
        Command::Oracle { config } => commands::cmd_oracle(config),
        Command::Blowup { config, field } => commands::cmd_blowup(config, field.as_deref()),
        Command::Mesh { config } => commands::cmd_mesh(config),
    };
    let status = match result {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<bernoulli::Error>() {
                Some(bernoulli::Error::NotConverged { .. }) => Status::NotConverged,
                _ => Status::Input,
            }
        }
    };
    ExitCode::from(status as u8)
}
