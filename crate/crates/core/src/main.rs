use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use redispatch::config::RunConfig;
use redispatch::pipeline;

/// Counterfactual re-dispatch cost pipeline.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `paths.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Load and validate raw CSVs, write the net-demand panel.
    Ingest,
    /// Train the configured model.
    Train,
    /// Hyperband search, then retrain the winner.
    Tune,
    /// Out-of-sample errors, Wilcoxon tests and prediction band.
    Evaluate,
    /// Renewable-expansion counterfactuals.
    Scenario,
    /// Write a synthetic dataset.
    Synth,
}

fn run(cli: &Cli) -> redispatch::Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = match cli.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    };
    let out = cli.out.clone().unwrap_or_else(|| cfg.paths.out.clone());
    match cli.command {
        Command::Ingest => pipeline::cmd_ingest(&cfg, &out).map(drop),
        Command::Train => pipeline::cmd_train(&cfg, &out).map(drop),
        Command::Tune => pipeline::cmd_tune(&cfg, &out).map(drop),
        Command::Evaluate => pipeline::cmd_evaluate(&cfg, &out).map(drop),
        Command::Scenario => pipeline::cmd_scenario(&cfg, &out).map(drop),
        Command::Synth => pipeline::cmd_synth(&cfg, &out).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
