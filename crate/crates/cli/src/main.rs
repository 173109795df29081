//! `polarmac`: batch experiments for polar codes on multiple access channels.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 when a
//! size or depth cap is exceeded.

mod channel;
mod commands;
mod error;
mod output;
mod probe;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, ConstructArgs, EvolveArgs, PolarizeArgs, ProbeArgs, SimulateArgs};

#[derive(Debug, Parser)]
#[command(name = "polarmac", version, about = "Polar codes for multiple access channels over prime fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mutual informations, sum capacity and rate-region corner points.
    Analyze(AnalyzeArgs),
    /// Branch-averaged informations per level and per-branch direction statistics.
    Polarize(PolarizeArgs),
    /// Build a code specification.
    Construct(ConstructArgs),
    /// Monte Carlo block-error rate of a code under successive cancellation.
    Simulate(SimulateArgs),
    /// Subspace-level evolution of a linear-combination channel.
    Evolve(EvolveArgs),
    /// Scan for evidence about the open conjectures.
    ProbeConjectures(ProbeArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Polarize(a) => commands::polarize(a),
        Command::Construct(a) => commands::construct(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Evolve(a) => commands::evolve(a),
        Command::ProbeConjectures(a) => commands::probe_conjectures(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
