mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliResult;
use crate::manifest::Overrides;

/// Dynamic multi-process fusion for visual place recognition.
#[derive(Parser)]
#[command(name = "dynfuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run strategies from a manifest and evaluate them.
    Run {
        #[command(flatten)]
        common: RunArgs,
        /// Calibration interval.
        #[arg(long = "frame-sep")]
        frame_sep: Option<usize>,
    },
    /// Evaluate Dyn-MPF across several calibration intervals.
    Sweep {
        #[command(flatten)]
        common: RunArgs,
        /// Calibration intervals to evaluate (default 1,5,10,25,50).
        #[arg(long = "frame-sep", value_delimiter = ',')]
        frame_sep: Vec<usize>,
    },
    /// Generate a synthetic benchmark and a manifest that runs it.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate matrix payloads against their sidecars.
    IngestCheck {
        /// Check every matrix referenced by this manifest.
        #[arg(long)]
        config: Option<PathBuf>,
        files: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Strategy to run; repeat for several. Overrides the manifest list.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    #[arg(long = "r-window")]
    r_window: Option<usize>,
    #[arg(long = "recall-k", value_delimiter = ',')]
    recall_k: Vec<usize>,
}

impl RunArgs {
    fn overrides(&self, frame_separation: Option<usize>) -> Overrides {
        Overrides {
            out: self.out.clone(),
            workers: self.workers,
            seed: self.seed,
            strategies: self.strategies.clone(),
            r_window: self.r_window,
            frame_separation,
            recall_k: (!self.recall_k.is_empty()).then(|| self.recall_k.clone()),
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { common, frame_sep } => {
            commands::run(&common.config, &common.overrides(frame_sep))
        }
        Command::Sweep { common, frame_sep } => {
            let f = (!frame_sep.is_empty()).then_some(frame_sep.as_slice());
            commands::sweep(&common.config, &common.overrides(None), f)
        }
        Command::Synth { spec, out, seed } => commands::synth(&spec, &out, seed),
        Command::IngestCheck { config, files } => {
            commands::ingest_check(config.as_deref(), &files)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DYNFUSE_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
