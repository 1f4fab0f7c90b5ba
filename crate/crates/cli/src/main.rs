use std::path::PathBuf;
use std::process::ExitCode;

use barenblatt_cli::commands::{cmd_converge, cmd_price, cmd_validate, Overrides};
use barenblatt_cli::config::SideSelection;
use barenblatt_cli::{CliResult, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Ask and bid prices under an uncertain volatility band.
#[derive(Parser)]
#[command(name = "barenblatt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON). `BARENBLATT__SECTION__KEY` variables override fields.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    side: Option<SideSelection>,
    /// Spot for the t=0 readout, linear between nodes.
    #[arg(long)]
    spot: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and write surfaces.
    Price {
        #[command(flatten)]
        common: Common,
        /// Audit the M-matrix property at every step.
        #[arg(long)]
        check: bool,
    },
    /// Dyadic refinement study against the closed-form price.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        levels: u32,
    },
    /// Run the invariant battery on the configured problem.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> CliResult<(RunConfig, Overrides)> {
    let config = RunConfig::load(&common.config, std::env::vars())?;
    let overrides = Overrides { out: common.out.clone(), side: common.side, spot: common.spot };
    Ok((config, overrides))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Price { common, check } => {
            let (config, o) = load(&common)?;
            print!("{}", cmd_price(&config, &o, check)?);
        }
        Command::Converge { common, levels } => {
            let (config, o) = load(&common)?;
            print!("{}", cmd_converge(&config, &o, levels)?);
        }
        Command::Validate { common } => {
            let (config, _) = load(&common)?;
            let (text, status) = cmd_validate(&config)?;
            print!("{text}");
            status?;
        }
    }
    Ok(())
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
