use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fxdir::commands::{Context, Outcome};
use fxdir::config::{ExperimentConfig, Overrides};
use fxdir::error::{AppError, Result, EXIT_RUNTIME};

#[derive(Debug, Parser)]
#[command(name = "fxdir", version, about = "Daily EUR/USD direction workbench")]
struct Cli {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true, env = "FXDIR_CONFIG")]
    config: Option<PathBuf>,

    /// Overrides `seed`.
    #[arg(long, global = true, env = "FXDIR_SEED")]
    seed: Option<u64>,

    /// Worker threads for tuning, training and backtests (0 = all cores).
    #[arg(long, global = true, env = "FXDIR_JOBS", default_value_t = 0)]
    jobs: usize,

    /// Rerun even when the output manifest shows nothing changed.
    #[arg(long, global = true, env = "FXDIR_FORCE")]
    force: bool,

    /// Overrides `data_dir`.
    #[arg(long, global = true, env = "FXDIR_DATA_DIR")]
    data_dir: Option<PathBuf>,

    /// Overrides `output_dir`.
    #[arg(long, global = true, env = "FXDIR_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    /// Overrides `run_id`.
    #[arg(long, global = true, env = "FXDIR_RUN_ID")]
    run_id: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic data directory (OHLCV and indicator calendars).
    Synth {
        /// Target trading days; defaults to `synth.days`.
        #[arg(long)]
        days: Option<usize>,
    },
    /// Align the raw files into a panel and fit the value transforms.
    Ingest,
    /// Build the configured datasets from the panel.
    Build,
    /// Tiered hyperparameter and feature search for every tuned model.
    Tune,
    /// Fit final models on all data before the test year.
    Train,
    /// Evaluate every model and stack under the configured protocols.
    Backtest,
    /// Emit tables, profit series, summaries and plots.
    Report {
        /// Run ids to combine; defaults to the current run.
        #[arg(long, value_delimiter = ',')]
        runs: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<Outcome> {
    let overrides = Overrides { seed: cli.seed, data_dir: cli.data_dir, output_dir: cli.output_dir, run_id: cli.run_id };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    let ctx = Context { cfg, force: cli.force };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| AppError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth { days } => ctx.synth(*days),
        Command::Ingest => ctx.ingest(),
        Command::Build => ctx.build(),
        Command::Tune => ctx.tune(),
        Command::Train => ctx.train(),
        Command::Backtest => ctx.backtest(),
        Command::Report { runs } => ctx.report(runs),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = format!("{:?}", cli.command).split([' ', '{']).next().unwrap_or("").to_lowercase();
    match run(cli) {
        Ok(Outcome::Wrote(dir)) => {
            println!("{name}: wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Ok(Outcome::UpToDate(dir)) => {
            println!("{name}: {} is up to date (use --force to rerun)", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(u8::try_from(code).unwrap_or(EXIT_RUNTIME as u8))
        }
    }
}
