//! `rfdm`: generate synthetic radar gesture data, condition it, train and
//! evaluate classifiers, run inference and export plots.

mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rfdm_core::eval::SplitKind;
use rfdm_core::model::ModelKind;
use rfdm_core::Error;

use commands::{CliError, CliResult, PlotFormat};
use config::{Overrides, PipelineConfig};
use run::RunLog;

/// Exit status for each error category.
mod exit {
    pub const USAGE: u8 = 2;
    pub const CONFIG: u8 = 3;
    pub const DATA: u8 = 4;
    pub const INTEGRITY: u8 = 5;
    pub const IO: u8 = 6;
}

#[derive(Parser)]
#[command(name = "rfdm", version, about = "Synthetic FMCW radar gesture pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON pipeline config; omitted fields use the standard benchmark values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Render raw data cubes and a dataset manifest.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Turn a cube dataset into conditioned RFDM sequences.
    Preprocess {
        /// Manifest written by `gen`.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Skip the moving-target-indication filter.
        #[arg(long)]
        no_mti: bool,
    },
    /// Train one model on an RFDM dataset (15% held out for checkpoint selection).
    Train {
        /// Manifest written by `preprocess`.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_model)]
        model: Option<ModelKind>,
    },
    /// Run an evaluation protocol on an RFDM dataset.
    Eval {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_protocol)]
        protocol: Option<SplitKind>,
        #[arg(long, value_parser = parse_model)]
        model: Option<ModelKind>,
    },
    /// Classify an RFDM file or every sequence of an RFDM manifest.
    Infer {
        /// An `.rfdm` file or a manifest `.json`.
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export one RFDM frame (csv or pgm) or a confusion matrix (csv).
    Plot {
        /// An `.rfdm` file, an evaluation report or a `{"counts": ..}` JSON file.
        input: PathBuf,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: PlotFormat,
        #[arg(long, default_value_t = 0)]
        frame: usize,
    },
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_protocol(s: &str) -> Result<SplitKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn resolve(common: &Common, overrides: Overrides) -> CliResult<PipelineConfig> {
    let overrides = Overrides { seed: common.seed, ..overrides };
    Ok(PipelineConfig::resolve(common.config.as_deref(), &overrides)?)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen { common } => {
            let cfg = resolve(&common, Overrides::default())?;
            let mut log = RunLog::new("gen", Some(&cfg));
            commands::gen(&cfg, &common.out, &mut log)?;
            log.finish(&common.out.join("run-gen.json"))?;
        }
        Command::Preprocess { input, common, no_mti } => {
            let cfg = resolve(&common, Overrides { no_mti, ..Default::default() })?;
            let mut log = RunLog::new("preprocess", Some(&cfg));
            commands::preprocess_cmd(&cfg, &input, &common.out, &mut log)?;
            log.finish(&common.out.join("run-preprocess.json"))?;
        }
        Command::Train { input, common, model } => {
            let cfg = resolve(&common, Overrides { model_kind: model, ..Default::default() })?;
            let mut log = RunLog::new("train", Some(&cfg));
            commands::train_cmd(&cfg, &input, &common.out, &mut log)?;
            log.finish(&common.out.join("run-train.json"))?;
        }
        Command::Eval { input, common, protocol, model } => {
            let cfg = resolve(&common, Overrides { model_kind: model, protocol, ..Default::default() })?;
            let mut log = RunLog::new("eval", Some(&cfg));
            commands::eval_cmd(&cfg, &input, &common.out, &mut log)?;
            log.finish(&common.out.join("run-eval.json"))?;
        }
        Command::Infer { input, checkpoint, out } => {
            let mut log = RunLog::new("infer", None);
            commands::infer_cmd(&checkpoint, &input, &out, &mut log)?;
            log.finish(&out.join("run-infer.json"))?;
        }
        Command::Plot { input, out, format, frame } => {
            let mut log = RunLog::new("plot", None);
            commands::plot_cmd(&input, &out, format, frame, &mut log)?;
            let mut run_path = out.into_os_string();
            run_path.push(".run.json");
            log.finish(&PathBuf::from(run_path))?;
        }
    }
    Ok(())
}

fn category(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Param(_) | Error::Placement(_) | Error::Range(_) => exit::CONFIG,
        Error::Integrity { .. } => exit::INTEGRITY,
        Error::Io(_) => exit::IO,
        _ => exit::DATA,
    }
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("RFDM_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("RFDM_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed.
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match init_threads().and_then(|()| dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(exit::USAGE)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(category(&e))
        }
    }
}
