use std::path::PathBuf;

use clap::{Parser, Subcommand};

use nehari_lab_cli::config::{Mode, RunConfig};
use nehari_lab_cli::run;

/// Numerical laboratory for least-energy states of coupled cubic-quintic
/// systems with critical exponent on a ball.
#[derive(Parser)]
#[command(name = "nehari-lab", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for this run's artifacts (default runs/<mode>).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Grid resolution override for solve.grid_cells.
    #[arg(long, global = true, value_name = "N")]
    grid: Option<usize>,
    /// Seed override for solve.seed.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scalar problems and dump the derived constant chain.
    Constants,
    /// Minimize the energy on the product Nehari set; write level and profiles.
    Solve,
    /// Run the energy-estimate checks and print a PASS/FAIL/SKIP table.
    Verify,
    /// Tabulate the cutoff-bubble integrals and their fitted expansions.
    Expansion,
    /// Re-solve across a list of couplings and summarize the levels.
    Sweep,
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::Constants => Mode::Constants,
            Command::Solve => Mode::Solve,
            Command::Verify => Mode::Verify,
            Command::Expansion => Mode::Expansion,
            Command::Sweep => Mode::Sweep,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = RunConfig::load(cli.config.as_deref())
        .and_then(|rc| rc.normalize(cli.command.mode(), cli.out, cli.grid, cli.seed))
        .and_then(|rc| run::run(&rc));
    if let Err(failure) = outcome {
        eprintln!("error: {failure}");
        std::process::exit(failure.exit_code());
    }
}
