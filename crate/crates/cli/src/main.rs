//! `qkd3` — deterministic experiment runner for the three-stage multi-photon
//! QKD toolkit. Every command reads a JSON config (unknown keys rejected),
//! applies flag overrides, and emits a CSV or JSON table whose header embeds
//! the resolved config; re-running an embedded config reproduces the file
//! byte for byte.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use output::{Format, RowFailure, Table};

#[derive(Parser)]
#[command(name = "qkd3", version, about = "Three-stage multi-photon QKD experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eve's IR/PNS error probability over an (N, t) grid with scenario budgets
    AttackSweep(CommonArgs),
    /// Authentication error probabilities: Monte Carlo, closed form and MIM
    AuthSweep(CommonArgs),
    /// Secret key rate, QBER threshold and MIM fraction over (N, t, Q) or a transcript
    Keyrate(CommonArgs),
    /// Rate-efficiency ratio vs fiber length plus the advantage distance
    Efficiency(CommonArgs),
    /// One full protocol session with an optional attack
    ProtocolSim(ProtocolSimArgs),
    /// Tabulated I0, L0, I0-L0 and the closed-form error probability
    SpecfunTable(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration document
    #[arg(long)]
    config: PathBuf,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Overrides the config's seed (ignored by purely deterministic commands)
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's Monte Carlo trial count (same caveat)
    #[arg(long)]
    trials: Option<u64>,
    /// Rayon worker threads (results are identical for any count)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ProtocolSimArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the full transcript document here
    #[arg(long)]
    transcript_out: Option<PathBuf>,
    /// Include the per-pulse array in the transcript document
    #[arg(long)]
    include_pulses: bool,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::AttackSweep(c)
        | Command::AuthSweep(c)
        | Command::Keyrate(c)
        | Command::Efficiency(c)
        | Command::SpecfunTable(c) => c,
        Command::ProtocolSim(p) => &p.common,
    };
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }

    let (table, failures) = match &cli.command {
        Command::AttackSweep(args) => {
            let mut cfg: config::AttackSweepConfig = config::load(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(trials) = args.trials {
                cfg.trials = trials;
            }
            commands::attack_sweep(cfg)?
        }
        Command::AuthSweep(args) => {
            let mut cfg: config::AuthSweepConfig = config::load(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(trials) = args.trials {
                cfg.trials = trials;
            }
            commands::auth_sweep(cfg)?
        }
        Command::Keyrate(args) => {
            let mut cfg: config::KeyrateConfig = config::load(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(trials) = args.trials {
                cfg.trials = trials;
            }
            commands::keyrate(cfg)?
        }
        Command::Efficiency(args) => {
            let cfg: config::EfficiencyConfig = config::load(&args.config)?;
            commands::efficiency(cfg)?
        }
        Command::SpecfunTable(args) => {
            let cfg: config::SpecfunTableConfig = config::load(&args.config)?;
            commands::specfun_table(cfg)?
        }
        Command::ProtocolSim(args) => {
            let mut cfg: config::ProtocolSimConfig = config::load(&args.common.config)?;
            if let Some(seed) = args.common.seed {
                cfg.session.seed = seed;
            }
            if let Some(trials) = args.common.trials {
                cfg.trials = trials;
            }
            let result = commands::protocol_sim(cfg)?;
            if let Some(path) = &args.transcript_out {
                let doc = result.transcript.to_json_value(args.include_pulses);
                let mut text = serde_json::to_string_pretty(&doc)?;
                text.push('\n');
                std::fs::write(path, text)
                    .with_context(|| format!("writing transcript {}", path.display()))?;
            }
            (result.table, result.failures)
        }
    };

    emit(&table, common)?;
    Ok(report_failures(&failures))
}

fn emit(table: &Table, args: &CommonArgs) -> anyhow::Result<()> {
    let text = table.render(args.format);
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing output {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn report_failures(failures: &[RowFailure]) -> ExitCode {
    if failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    eprintln!("{} row(s) failed:", failures.len());
    for failure in failures {
        eprintln!("  row {}: {}", failure.row, failure.message);
    }
    ExitCode::FAILURE
}
