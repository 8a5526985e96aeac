use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bench::{execute, Command, Invocation, Threads};

#[derive(Parser)]
#[command(name = "bench", version, about = "Linear bandit regret benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cumulative regret at sim.T over the d and K grids.
    Run(Args),
    /// Sensitivity sweep over one policy parameter.
    Sweep(Args),
    /// Regret at every horizon of sim.T_grid.
    #[command(name = "varyT")]
    VaryT(Args),
    /// Monte Carlo checks of the regularity conditions.
    Conditions(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads, or `auto`.
    #[arg(long, env = "BENCH_THREADS", default_value = "auto")]
    threads: Threads,
    /// `key.path=value` edits applied to the config file.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Run(a) => (Command::Run, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::VaryT(a) => (Command::VaryT, a),
        Cmd::Conditions(a) => (Command::Conditions, a),
    };
    let inv = Invocation {
        command,
        config_path: args.config,
        out_dir: args.out,
        threads: args.threads,
        overrides: args.overrides,
    };
    match execute(&inv) {
        Ok(outcome) => {
            for f in &outcome.files {
                eprintln!("wrote {}", outcome.out_dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
