use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use contdef::commands::{cmd_certify, cmd_run, cmd_sweep, SweepParam};
use contdef::OUT_DIR_ENV;

#[derive(Parser)]
#[command(name = "contdef", version, about = "Certify and simulate continuum deformation formation flights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the scenario's plan against the safety certificate.
    Certify {
        scenario: PathBuf,
        /// Print a JSON record instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Simulate the scenario and write traces and reports.
    Run {
        scenario: PathBuf,
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
        /// Fly an uncertified plan and overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Repeat the run over several values of one parameter.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Certify { scenario, json } => cmd_certify(scenario, *json, &mut stdout),
        Command::Run { scenario, out, force } => cmd_run(scenario, out.as_deref(), *force, &mut stdout),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
        } => cmd_sweep(scenario, *param, values, out.as_deref(), &mut stdout),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
