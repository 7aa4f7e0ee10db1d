//! `slipsim` command-line front end.
//!
//! Every subcommand reads a JSON config, runs one of the library entry
//! points, and writes CSV output plus a JSON summary next to it. Exit
//! codes: 0 success, 1 I/O failure, 2 bad config, 3 numerical failure.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Command-level error with a stable exit-code mapping.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed, or invalid configuration. Exit code 2.
    Config(String),
    /// The computation itself failed (non-finite state, empty sweep). Exit code 3.
    Numeric(String),
    /// Filesystem trouble writing results. Exit code 1.
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config: {msg}"),
            CliError::Numeric(msg) => write!(f, "numeric: {msg}"),
            CliError::Io(msg) => write!(f, "io: {msg}"),
        }
    }
}

/// Maps library errors onto the CLI taxonomy. Domain and table errors mean
/// the config described an impossible setup; non-finite states are numeric.
pub fn from_core(err: slipsim::Error) -> CliError {
    match err {
        slipsim::Error::NonFinite { .. } => CliError::Numeric(err.to_string()),
        _ => CliError::Config(err.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "slipsim",
    version,
    about = "Simulation and stability analysis for differential-drive robots under wheel slip"
)]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop simulation and write the trajectory log.
    Simulate {
        /// JSON scenario config.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path; the summary lands alongside as .summary.json.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's integration step.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Sweep controller gains over a grid and write the cost table.
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's integration step.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Scan the linearized stability certificate along the reference.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's classification margin.
        #[arg(long)]
        margin: Option<f64>,
        /// Override the config's sample spacing.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Export the built-in reference trajectory as CSV.
    Reference {
        #[arg(long)]
        out: PathBuf,
        /// End of the generated trajectory in seconds.
        #[arg(long, default_value_t = 70.0)]
        t_final: f64,
        /// Sample spacing in seconds.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Run the adaptive and fixed-parameter controllers side by side.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's integration step for both runs.
        #[arg(long)]
        step: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: config: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        // Ignore the error if a pool already exists; only the first call wins.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }

    let result = match &cli.command {
        Command::Simulate { config, out, step } => commands::simulate(config, out, *step),
        Command::Tune { config, out, step } => commands::tune(config, out, *step),
        Command::Stability {
            config,
            out,
            margin,
            step,
        } => commands::stability(config, out, *margin, *step),
        Command::Reference { out, t_final, step } => commands::reference(out, *t_final, *step),
        Command::Compare { config, out, step } => commands::compare(config, out, *step),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
