use std::path::PathBuf;
use std::process::ExitCode;

use ampkit_cli::config::{ConfigError, ExperimentConfig};
use ampkit_cli::{run, CliError, Scale};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ampkit", version, about = "Compressed sensing and sparse superposition code experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// AMP reconstruction traces, with state evolution alongside.
    CsRun(Flags),
    /// Empirical success fractions on a (rho, alpha) grid.
    CsPhase(Flags),
    /// State-evolution fixed points and transition lines.
    SePhase(Flags),
    /// Time to convergence, structured operator against dense matrix.
    Bench(Flags),
    /// Encode, transmit and decode sparse superposition codewords.
    CodeRun(Flags),
    /// Section and block error rates across code rates.
    CodeSweep(Flags),
}

impl Command {
    fn split(self) -> (&'static str, Flags) {
        match self {
            Command::CsRun(f) => ("cs-run", f),
            Command::CsPhase(f) => ("cs-phase", f),
            Command::SePhase(f) => ("se-phase", f),
            Command::Bench(f) => ("bench", f),
            Command::CodeRun(f) => ("code-run", f),
            Command::CodeSweep(f) => ("code-sweep", f),
        }
    }
}

#[derive(clap::Args)]
struct Flags {
    /// Experiment config (JSON, schema ampkit-config/1).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Master seed; replaces the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: out/<command>].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads [default: all cores].
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    scale: Option<Scale>,
}

fn execute(name: &str, flags: Flags) -> Result<PathBuf, CliError> {
    let config = ExperimentConfig::load(&flags.config)?;
    if config.experiment.name() != name {
        return Err(ConfigError::Invalid(format!(
            "config describes a {} experiment, not {name}",
            config.experiment.name()
        ))
        .into());
    }
    let config = config.resolve(flags.seed, flags.scale);
    if let Some(t) = flags.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    let out = flags.out.unwrap_or_else(|| PathBuf::from("out").join(name));
    run::run(&config, &out)?;
    Ok(out)
}

fn main() -> ExitCode {
    let (name, flags) = Cli::parse().command.split();
    match execute(name, flags) {
        Ok(out) => {
            println!("{name}: wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ampkit {name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
