use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irgn_halley::cli::{self, Overrides};

/// Config-driven experiments for regularized Newton-Halley inversion in
/// discrete L^p spaces.
#[derive(Parser)]
#[command(name = "irgn-halley", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Sectioned key=value experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output] directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override (overrides [noise] seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent workers for sweep commands.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate truth coefficient, state, exact and noisy data.
    Forward(Common),
    /// Run one inversion and write the iteration trace.
    Invert(Common),
    /// Noise-level sweep with a log-log rate fit.
    Rates(Common),
    /// Paired impulsive-noise runs with misfit exponents 1.1 and 2.
    Compare(Common),
    /// Series constants, recursion and implication certificates.
    Lemmas(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Forward(c)
            | Command::Invert(c)
            | Command::Rates(c)
            | Command::Compare(c)
            | Command::Lemmas(c) => c,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.command.common();
    let overrides = Overrides {
        out_dir: common.out.clone(),
        seed: common.seed,
        workers: common.workers,
    };
    let result = match &cli.command {
        Command::Forward(c) => cli::cmd_forward(&c.config, &overrides),
        Command::Invert(c) => cli::cmd_invert(&c.config, &overrides),
        Command::Rates(c) => cli::cmd_rates(&c.config, &overrides),
        Command::Compare(c) => cli::cmd_compare(&c.config, &overrides),
        Command::Lemmas(c) => cli::cmd_lemmas(&c.config, &overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("irgn-halley: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
