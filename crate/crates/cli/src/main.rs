use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracpme_cli::commands;
use fracpme_cli::config::ExperimentConfig;
use fracpme_cli::CliError;

/// Solver and verification lab for u_t + (-Delta)^{1/2}(|u|^{m-1}u) = 0.
#[derive(Parser)]
#[command(name = "fracpme", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Only print errors.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides `output.directory`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate the three half-Laplacian backends.
    Selftest(Common),
    /// Solve one implicit step u + eps Lambda(u^m) = g.
    Resolve(Common),
    /// Run the implicit scheme and write a trajectory directory.
    Evolve(Common),
    /// Compute the separable extinction profile.
    Profile(Common),
    /// Run diagnostics over a trajectory directory written by `evolve`.
    Verify {
        #[command(flatten)]
        common: Common,
        trajectory: PathBuf,
    },
    /// Run the acceptance criteria.
    Acceptance(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output.directory = out.clone();
    }
    Ok(cfg)
}

fn dispatch(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Selftest(c) => commands::selftest(&load(c)?),
        Command::Resolve(c) => commands::resolve(&load(c)?),
        Command::Evolve(c) => commands::evolve_command(&load(c)?),
        Command::Profile(c) => commands::profile(&load(c)?),
        Command::Verify { common, trajectory } => commands::verify(&load(common)?, trajectory),
        Command::Acceptance(c) => commands::acceptance(&load(c)?).map(|(_, text)| text),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(text) => {
            if !cli.quiet {
                print!("{text}");
                if !text.ends_with('\n') {
                    println!();
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                CliError::Failure(text) => eprint!("{text}"),
                other => eprintln!("fracpme: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
