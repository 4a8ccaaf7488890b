mod commands;
mod config;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::CliError;
use crate::record::{CertificateRecord, Outcome};

#[derive(Parser, Debug)]
#[command(name = "constructa", version, about = "Certified computations with error certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML problem definition.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every randomized check; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel scans.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Directory for the certificate and data files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Re-run the numeric kernel at halved tolerance and compare.
    #[arg(long, global = true)]
    precision_audit: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// ε-minimize a functional over a Lipschitz policy class.
    EvtMin,
    /// Directional derivative of a max-function with a finite-difference audit.
    Danskin,
    /// Extract a piecewise-constant selector from a set-valued map.
    Selector,
    /// Approximate eigenpairs and a Hurwitz verdict.
    Eig,
    /// Certified Carathéodory solve.
    Ode,
    /// Sampling-time search and closed-loop sample-and-hold run.
    Shh,
    /// Lyapunov certificate check.
    Certify,
    /// Seeded property suite over every module.
    Audit,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::EvtMin => "evt-min",
            Command::Danskin => "danskin",
            Command::Selector => "selector",
            Command::Eig => "eig",
            Command::Ode => "ode",
            Command::Shh => "shh",
            Command::Certify => "certify",
            Command::Audit => "audit",
        }
    }
}

pub struct RunContext {
    pub seed: u64,
    pub precision_audit: bool,
    pub config_dir: PathBuf,
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        None if cli.command == Command::Audit => String::new(),
        None => return Err(CliError::Config("--config is required".into())),
    };
    let config_dir = cli
        .config
        .as_ref()
        .and_then(|p| p.parent().map(|d| d.to_path_buf()))
        .unwrap_or_default();
    let config_seed = config::peek_seed(&text)?;
    let ctx = RunContext {
        seed: cli.seed.or(config_seed).unwrap_or(0),
        precision_audit: cli.precision_audit,
        config_dir,
    };
    let start = Instant::now();
    let outcome: Outcome = match cli.command {
        Command::EvtMin => commands::evt::run(&text, &ctx)?,
        Command::Danskin => commands::danskin::run(&text, &ctx)?,
        Command::Selector => commands::selector::run(&text, &ctx)?,
        Command::Eig => commands::eig::run(&text, &ctx)?,
        Command::Ode => commands::ode::run(&text, &ctx)?,
        Command::Shh => commands::shh::run(&text, &ctx)?,
        Command::Certify => commands::certify::run(&text, &ctx)?,
        Command::Audit => commands::audit::run(&text, &ctx)?,
    };
    let name = cli.command.name();
    let record = CertificateRecord::new(name, &text, &ctx, outcome, start.elapsed().as_secs_f64());
    record.write(&cli.out)?;
    println!("{name}: {} (exit {})", record.verdict.label(), record.exit_code);
    Ok(record.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("constructa: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
