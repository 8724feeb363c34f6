//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure, 4 verification failure.
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gbbm::commands::{self, Report};
use gbbm::{Error, Result};

#[derive(Parser)]
#[command(name = "gbbm", version, about = "GBBM / BBM-Burgers pseudospectral simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configuration; writes norms.csv, snapshots and run.log.
    Run {
        config: PathBuf,
        /// Output directory (overrides `[output] dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the Helmholtz solver against a dense direct solve.
    VerifyHelmholtz {
        /// Number of random right-hand sides.
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Energy identities and Gronwall envelope; writes energy.csv.
    VerifyEnergy {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continuous-dependence experiment; writes dependence.csv.
    Dependence {
        config: PathBuf,
        /// Decreasing perturbation scales (overrides `[perturbation] eps`).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// dt-halving and L2-doubling studies; writes convergence.csv.
    Convergence {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<Report> {
    match cli.command {
        Command::Run { config, out } => commands::run_command(&commands::load_config(&config)?, out.as_deref()),
        Command::VerifyHelmholtz { n, seed } => commands::verify_helmholtz(n, seed),
        Command::VerifyEnergy { config, out } => {
            commands::verify_energy(&commands::load_config(&config)?, out.as_deref())
        }
        Command::Dependence { config, eps, out } => {
            commands::dependence_command(&commands::load_config(&config)?, eps.as_deref(), out.as_deref())
        }
        Command::Convergence { config, out } => {
            commands::convergence_command(&commands::load_config(&config)?, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                Error::Io(_) => 2,
                other => other.exit_code(),
            };
            ExitCode::from(code.clamp(1, 255) as u8)
        }
    }
}
