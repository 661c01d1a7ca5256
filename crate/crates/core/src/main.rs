use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rmatrix::cli::{self, CliError, RunArgs};

/// Scattering and R-matrices of 1D Schrödinger operators with two leads.
#[derive(Parser)]
#[command(name = "rmatrix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the energy grid of a JSON system description.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "./out")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Compare against the eigenfunction series.
        #[arg(long, overrides_with = "no_series")]
        series: bool,
        #[arg(long)]
        no_series: bool,
        /// Write the divergence diagnostic.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Turn sweep.csv into two-column .dat files.
    Plotdata {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "./out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<Vec<PathBuf>, CliError> = match cli.command {
        Command::Run { config, out, threads, series, no_series, diagnostics } => {
            let series = if series {
                Some(true)
            } else if no_series {
                Some(false)
            } else {
                None
            };
            cli::run(&RunArgs { config, out, threads, series, diagnostics })
        }
        Command::Plotdata { input, out } => cli::emit_plotdata(&input, &out),
    };
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
