//! Command-line pipeline.
//!
//! Every subcommand resolves a [`RunConfig`], performs its work, and leaves a
//! [`RunManifest`] in its output directory. `replay` feeds a manifest back in.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{execute, load_model, resolve_out, ModelMeta, Outcome, SavedModel, SweepParam, ABLATION_LADDER};
pub use config::{parse_delta_grid, parse_values, EvalConfig, RunConfig};
pub use manifest::{Invocation, RunManifest, MANIFEST_FILE};

use crate::dataset::DatasetFormat;
use crate::error::{Error, Result};
use crate::prototype::TrainMode;

#[derive(Debug, Parser)]
#[command(name = "pzsl", version, about = "Zero-shot prototype learning with placeholder classes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    S2v,
    Ep,
    EpEi,
    Full,
}

impl From<ModeArg> for TrainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::S2v => TrainMode::S2vBaseline,
            ModeArg::Ep => TrainMode::EpOnly,
            ModeArg::EpEi => TrainMode::EpEi,
            ModeArg::Full => TrainMode::Full,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: DatasetFormat,
    },
    /// Fine-tune features (when the mode needs it) and train prototypes.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to `train.mode` from the config.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Fine-tune features for modes other than `full` too.
        #[arg(long)]
        sof: bool,
    },
    /// Score a trained model: ZSL, GZSL with calibrated stacking, prototype similarity.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// `0`, `start:end:step` or a comma list. Defaults to `0:1:0.02`.
        #[arg(long)]
        delta_grid: Option<String>,
        /// A second model directory whose similarity matrices are emitted alongside.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the five-rung ablation ladder over several seeds.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and score once per value of a hallucination parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// `n` or `sigma`.
        #[arg(long)]
        param: String,
        /// `0..8` or a comma list.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Write outputs here instead of the recorded directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(|e| Error::io(p, e))
}

/// Turns parsed arguments into a configuration and an invocation.
pub fn resolve(command: Command) -> Result<(RunConfig, Invocation)> {
    let resolved = match command {
        Command::Synth { config, out, format } => (
            RunConfig::load_or_default(config.as_deref())?,
            Invocation::Synth {
                out: absolute(&resolve_out(out, "pzsl-out/synth"))?,
                format,
            },
        ),
        Command::Train { config, data, out, mode, sof } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let mode = mode.map(TrainMode::from).unwrap_or(cfg.train.mode);
            let inv = Invocation::Train {
                data: absolute(&data)?,
                out: absolute(&resolve_out(out, "pzsl-out/train"))?,
                mode,
                sof,
            };
            (cfg, inv)
        }
        Command::Eval { model, data, delta_grid, compare, out } => {
            let mut cfg = RunConfig::load_or_default(None)?;
            if let Some(grid) = delta_grid {
                parse_delta_grid(&grid)?;
                cfg.eval.delta_grid = grid;
            }
            let inv = Invocation::Eval {
                model: absolute(&model)?,
                data: absolute(&data)?,
                out: absolute(&resolve_out(out, "pzsl-out/eval"))?,
                compare: compare.as_deref().map(absolute).transpose()?,
            };
            (cfg, inv)
        }
        Command::Ablate { config, data, seeds, out } => (
            RunConfig::load_or_default(config.as_deref())?,
            Invocation::Ablate {
                data: absolute(&data)?,
                out: absolute(&resolve_out(out, "pzsl-out/ablate"))?,
                seeds,
            },
        ),
        Command::Sweep { config, data, param, values, out } => {
            SweepParam::parse(&param)?;
            parse_values(&values)?;
            (
                RunConfig::load_or_default(config.as_deref())?,
                Invocation::Sweep {
                    data: absolute(&data)?,
                    out: absolute(&resolve_out(out, "pzsl-out/sweep"))?,
                    param,
                    values,
                },
            )
        }
        Command::Replay { manifest, out } => {
            let m = RunManifest::read(&manifest)?;
            let cfg = m.resolved_config()?;
            let inv = match out {
                Some(o) => m.invocation.with_out(absolute(&resolve_out(Some(o), ""))?),
                None => m.invocation,
            };
            (cfg, inv)
        }
    };
    Ok(resolved)
}

/// Executes one command line and writes its manifest.
pub fn run_command(command: Command, command_line: Vec<String>) -> Result<RunManifest> {
    let started = Instant::now();
    let (cfg, inv) = resolve(command)?;
    let outcome = execute(&inv, &cfg)?;
    let manifest = RunManifest {
        command_line,
        seed: cfg.seed,
        dataset_fingerprint: outcome.fingerprint,
        duration_secs: started.elapsed().as_secs_f64(),
        outputs: outcome.outputs,
        metrics: outcome.metrics,
        config: cfg.to_table(),
        invocation: inv,
    };
    manifest.write(manifest.invocation.out())?;
    Ok(manifest)
}

/// Parses `args` (including the program name) and runs. Returns the process
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let line = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run_command(cli.command, line) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
