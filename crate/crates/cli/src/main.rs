use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use needlebound::output::{run_directory, write_files, Outputs};
use needlebound::{commands, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "needlebound",
    version,
    about = "Needle ensembles, norm certificates, regret simulations and bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the ensemble and certify its RKHS norm (exit 2 if it fails).
    Construct(Common),
    /// Certify the RKHS norm only.
    Certify(Common),
    /// Run the configured algorithm against every ensemble member.
    Simulate(Common),
    /// Lower bounds, upper bounds and the exponent comparison table.
    Bounds(Common),
    /// Greedy information-gain estimates for t = 1..=T.
    Gamma(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (INI).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write straight into the output directory instead of a fresh run-<timestamp> subdirectory.
    #[arg(long)]
    overwrite: bool,
    /// Worker threads for `simulate`; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides algorithm.seed.
    #[arg(long)]
    seed: Option<u64>,
}

type Op = fn(&ExperimentConfig, usize) -> Result<Outputs, CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, op): (&Common, Op) = match &cli.command {
        Command::Construct(c) => (c, |cfg, _| commands::construct(cfg)),
        Command::Certify(c) => (c, |cfg, _| commands::certify(cfg)),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Bounds(c) => (c, |cfg, _| commands::bounds(cfg)),
        Command::Gamma(c) => (c, |cfg, _| commands::gamma(cfg)),
    };
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if common.workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let outputs = op(&cfg, common.workers)?;
    let base = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let dir = run_directory(&base, common.overwrite)?;
    write_files(&dir, &outputs)?;
    println!("{}", dir.display());
    match outputs.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
