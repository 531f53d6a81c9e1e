use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spa_cli::commands::{self, OutputOptions};
use spa_cli::{parse_config, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "spa-design", version, about = "Soft pneumatic actuator design, frequency placement and LQR studies")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "SPA_DESIGN_CONFIG")]
    config: Option<PathBuf>,
    /// Directory for CSV outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for optimizer multi-starts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print CSV instead of text.
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Torque, angle and objective over a pressure sweep.
    Eval,
    /// Optimize the cross-section and cross-check with the grid oracle.
    Optimize,
    /// Estimated natural frequency, optionally against a measured step trace.
    Freq {
        /// CSV with `time_s,angle_rad` columns.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// LQR synthesis and closed-loop step response.
    Control,
    /// Paper-style tables with computed values and deltas.
    Report,
    /// Fit the large-deflection exponent to stress-strain data.
    FitN {
        /// CSV with strain and stress (Pa) in the first two columns.
        #[arg(long)]
        data: PathBuf,
    },
}

fn load(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => parse_config(p),
        None => Err(CliError::Usage(
            "no configuration: pass --config or set SPA_DESIGN_CONFIG".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let report = match &cli.command {
        Command::Eval => commands::eval(&load(&cli.config)?)?,
        Command::Optimize => commands::optimize(&load(&cli.config)?, cli.seed)?,
        Command::Freq { trace } => commands::freq(&load(&cli.config)?, trace.as_deref())?,
        Command::Control => commands::control_cmd(&load(&cli.config)?)?,
        Command::Report => commands::report(&load(&cli.config)?, cli.seed)?,
        Command::FitN { data } => commands::fit_n(data)?,
    };
    let opts = OutputOptions {
        csv: cli.csv,
        out_dir: cli.out.clone(),
    };
    commands::emit(&report, &opts, &mut std::io::stdout().lock())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) | Err(CliError::Closed) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
