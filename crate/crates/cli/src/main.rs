use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use uavnoma_cli::commands::write_output;
use uavnoma_cli::{cmd_outage_sweep, cmd_pdf_compare, cmd_validate, CommandOutcome, RunConfig, Scheme};

/// Outage analysis of a two-UAV downlink NOMA network over bivariate Rician
/// shadowed fading.
#[derive(Debug, Parser)]
#[command(name = "uavnoma", version)]
struct Cli {
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination (stdout when omitted).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Override `sim.samples` (0 disables simulation).
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Override `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form vs integral-form joint PDF on a grid.
    PdfCompare,
    /// Analytic and simulated outage along the configured sweep.
    OutageSweep {
        #[arg(long, value_enum, default_value_t = SchemeArg::Both)]
        scheme: SchemeArg,
    },
    /// Run every oracle check at reduced scale.
    Validate,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Noma,
    Oma,
    Both,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Noma => Scheme::Noma,
            SchemeArg::Oma => Scheme::Oma,
            SchemeArg::Both => Scheme::Both,
        }
    }
}

fn run(cli: Cli) -> Result<CommandOutcome, Box<dyn std::error::Error>> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.samples {
        cfg.sim.samples = n;
    }
    if let Some(s) = cli.seed {
        cfg.sim.seed = s;
    }
    cfg.model()?;
    let outcome = match cli.command {
        Command::PdfCompare => cmd_pdf_compare(&cfg)?,
        Command::OutageSweep { scheme } => cmd_outage_sweep(&cfg, scheme.into())?,
        Command::Validate => cmd_validate(&cfg)?,
    };
    if let Some(csv) = &outcome.csv {
        write_output(csv, cli.output.as_deref())?;
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            for m in &outcome.messages {
                eprintln!("{m}");
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
