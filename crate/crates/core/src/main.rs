use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use herdlab::scenario::{execute, Command};

/// Herd/herder particle simulations, mean-field checks and control search.
#[derive(Debug, Parser)]
#[command(name = "herdlab", version)]
struct Cli {
    /// simulate, chaos-rates, fp-check, duality, optimize, gamma or validate
    command: Command,
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for CSVs and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when unset.
    #[arg(long, env = "HERDLAB_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads.filter(|n| *n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("herdlab: cannot size the thread pool: {e}");
        }
    }
    let manifest = execute(cli.command, &cli.scenario, &cli.out, cli.seed);
    for e in &manifest.errors {
        eprintln!("herdlab: {}", e.message);
    }
    if manifest.exit_code == 0 {
        for name in &manifest.outputs {
            println!("{}", cli.out.join(name).display());
        }
    }
    ExitCode::from(manifest.exit_code as u8)
}
