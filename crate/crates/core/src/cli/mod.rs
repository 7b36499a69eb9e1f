//! Command-line front end of the `mtlprog` binary.
//!
//! Exit codes: 0 success, 1 computation failure, 2 usage or configuration
//! error (including unreadable inputs).

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use artifacts::{
    load_dataset, load_series_file, save_dataset, write_manifest, FleetInfo, Manifest,
    ManifestEntry, FLEET_FILE, MANIFEST_FILE, SERIES_DIR, TIMING_FILE,
};
pub use commands::{
    cmd_compare, cmd_evaluate, cmd_gradcheck, cmd_noise_sweep, cmd_predict, cmd_prepare, cmd_synth,
    cmd_train, fit_normalizer, load_meta, noise_seed, predict_cell, split_fleet, time_models,
    train_model, ChannelForecast, FleetSplit, PredictionReport, StageSummary, TrainMeta, TrainMode,
    Trained, CHECKPOINT_FILE, TRAIN_META_FILE,
};
pub use config::{
    ModelSection, NoiseSection, Paths, Preset, RunConfig, SynthSection, TimingSection,
    TrainingSection, DEFAULT_FLEET_SIZE, DEFAULT_SEED,
};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mtlprog",
    version,
    about = "Multi-task battery degradation forecasting experiments"
)]
pub struct Cli {
    /// TOML run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Comma-separated noise fractions, e.g. 0,0.002,0.01.
    #[arg(long, global = true, value_delimiter = ',')]
    pub noise_grid: Option<Vec<f64>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interpolate checkup CSV data into per-cycle series.
    Prepare,
    /// Generate a synthetic fleet with ground-truth knees and end-of-life cycles.
    Synth,
    /// Train a model and write its checkpoint and loss history.
    Train {
        #[arg(long, value_enum, default_value = "mtl")]
        mode: TrainMode,
    },
    /// Forecast one cell from its first N cycles.
    Predict {
        #[arg(long)]
        at_cycle: usize,
    },
    /// Lifetime error progression on the test cells.
    Evaluate,
    /// Progression evaluation under each input-noise level.
    NoiseSweep,
    /// Multi-task versus single-task accuracy and prediction time.
    Compare {
        #[arg(long)]
        stl_cap: PathBuf,
        #[arg(long)]
        stl_res: PathBuf,
    },
    /// Finite-difference audit of the training gradient.
    Gradcheck {
        #[arg(long, default_value = "small")]
        size: GradcheckSize,
        /// Negate the analytic gradient; the audit must then fail.
        #[arg(long, hide = true)]
        flip_sign: bool,
    },
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum GradcheckSize {
    Small,
}

impl Cli {
    /// The config file (or defaults) with flag overrides applied.
    pub fn resolve_config(&self) -> crate::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.data {
            cfg.paths.data = Some(d.clone());
        }
        if let Some(o) = &self.out {
            cfg.paths.out = Some(o.clone());
        }
        if let Some(c) = &self.checkpoint {
            cfg.paths.checkpoint = Some(c.clone());
        }
        if let Some(g) = &self.noise_grid {
            cfg.noise.grid = g.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit code for an error: inputs and configuration are the caller's to fix.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::Io { .. }
        | Error::Data { .. }
        | Error::Cell { .. }
        | Error::Csv(_)
        | Error::Json(_)
        | Error::CheckpointVersion { .. }
        | Error::CorruptCheckpoint(_)
        | Error::InsufficientHistory { .. }
        | Error::HistoryTooLong { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn dispatch(cli: &Cli) -> crate::Result<i32> {
    let cfg = cli.resolve_config()?;
    match &cli.command {
        Command::Prepare => cmd_prepare(&cfg)?,
        Command::Synth => cmd_synth(&cfg)?,
        Command::Train { mode } => cmd_train(&cfg, *mode)?,
        Command::Predict { at_cycle } => cmd_predict(&cfg, *at_cycle)?,
        Command::Evaluate => cmd_evaluate(&cfg)?,
        Command::NoiseSweep => cmd_noise_sweep(&cfg)?,
        Command::Compare { stl_cap, stl_res } => cmd_compare(&cfg, stl_cap, stl_res)?,
        Command::Gradcheck { size: _, flip_sign } => {
            if !cmd_gradcheck(&cfg, *flip_sign)?.passed {
                return Ok(EXIT_FAILURE);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
