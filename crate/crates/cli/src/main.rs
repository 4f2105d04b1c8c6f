use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mphtlc_core::harness::{emit_report, parse_scenario, run_scenario, Format, Scenario};

/// Runs exchange scenarios on the two-ledger simulator. Exits with 2 when a
/// party ends with a partial exchange.
#[derive(Parser)]
#[command(name = "mphtlc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's protocol under its strategy profile or attack.
    Run(Common),
    /// Print the classification and giver/keeper/taker rows only.
    Classify(Common),
    /// Run every strategy profile with at most `bound` deviators.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bound: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    file: PathBuf,
    #[arg(long, default_value = "text")]
    format: Format,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(common: &Common) -> Result<Scenario> {
    let text = fs::read_to_string(&common.file).with_context(|| format!("reading {}", common.file.display()))?;
    let mut sc = parse_scenario(&text).with_context(|| format!("parsing {}", common.file.display()))?;
    if let Some(seed) = common.seed {
        sc.seed = seed;
    }
    Ok(sc)
}

fn execute(cli: Cli) -> Result<bool> {
    let (sc, format) = match cli.command {
        Command::Run(c) => (load(&c)?, c.format),
        Command::Classify(c) => {
            let mut sc = load(&c)?;
            sc.classify_only = true;
            (sc, c.format)
        }
        Command::Enumerate { common, bound } => {
            let mut sc = load(&common)?;
            if !sc.strategies.is_empty() || sc.attack.is_some() {
                bail!(
                    "{} fixes a strategy profile; remove it to enumerate",
                    common.file.display()
                );
            }
            sc.classify_only = false;
            sc.enumerate = Some(bound.or(sc.enumerate).unwrap_or(1));
            (sc, common.format)
        }
    };
    let report = run_scenario(&sc)?;
    print!("{}", emit_report(&report, format));
    Ok(report.any_violated())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
