//! `tcn-ai`: generate synthetic sections, train, predict, evaluate, export
//! figure data and check gradients.
//!
//! Every setting can come from a flat JSON file (`--config`), whose keys are
//! the flag names with `_` for `-`; flags win over the file. Each command
//! writes `manifest.json` next to its outputs, and passing that manifest back
//! as `--config` reruns the command.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numeric failure.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "tcn-ai", version, about = "Seismic to acoustic impedance inversion with a TCN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic impedance section and its seismic response
    Generate(GenerateFlags),
    /// Train on every `step`-th trace and write a checkpoint
    Train(TrainFlags),
    /// Predict impedance for a seismic section
    Predict(PredictFlags),
    /// Score predictions on training and validation traces
    Evaluate(EvaluateFlags),
    /// Write difference section, selected traces and scatter data
    Export(ExportFlags),
    /// Finite-difference check of every layer's gradients
    Gradcheck(GradcheckFlags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Symmetric,
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Normal,
    He,
}

#[derive(Args, Serialize)]
pub struct GenerateFlags {
    /// Flat JSON settings or a previous manifest
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// Number of traces [default: 2721]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    traces: Option<usize>,
    /// Samples per trace [default: 400]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    /// Exact layer count (sets both min and max)
    #[arg(long)]
    #[serde(skip)]
    layers: Option<usize>,
    /// [default: 8]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    min_layers: Option<usize>,
    /// [default: 14]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_layers: Option<usize>,
    /// Lowest layer impedance [default: 3000]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ai_lo: Option<f64>,
    /// Highest layer impedance [default: 12000]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ai_hi: Option<f64>,
    /// Horizon random-walk step std in samples [default: 0.6]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon_relief: Option<f64>,
    /// Horizon smoothing half-width in traces [default: 40]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon_smoothness: Option<usize>,
    /// Ricker peak frequency in Hz [default: 30]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ricker_freq: Option<f64>,
    /// Seconds per sample [default: 0.002]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_interval: Option<f64>,
    /// Metres between traces [default: 6.25]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_spacing: Option<f64>,
    /// Noise std relative to the clean signal RMS [default: 0.02]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Args, Serialize)]
pub struct TrainFlags {
    /// Flat JSON settings or a previous manifest
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Seismic SEIS1 section
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seismic: Option<PathBuf>,
    /// Impedance SEIS1 section
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    impedance: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// Train on traces 0, step, 2 step, ... [default: 150]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<usize>,
    /// [default: 2941]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lr: Option<f64>,
    /// Weight decay [default: 0.0001]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    wd: Option<f64>,
    /// [default: 0.2]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dropout: Option<f64>,
    /// Convolution kernel size [default: 5]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<usize>,
    /// Temporal blocks, dilations 1, 2, 4, ... [default: 6]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    blocks: Option<usize>,
    /// Channels per block [default: 8]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<usize>,
    /// [default: symmetric]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    padding: Option<Padding>,
    /// Direction init [default: normal]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<Init>,
    /// Std of the normal init [default: 0.1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    init_std: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Log the loss to stderr every N epochs, 0 for never [default: 100]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    log_every: Option<usize>,
}

#[derive(Args, Serialize)]
pub struct PredictFlags {
    /// Flat JSON settings or a previous manifest
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<PathBuf>,
    /// Seismic SEIS1 section
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seismic: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// Inference threads; output does not depend on it [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
}

#[derive(Args, Serialize)]
pub struct EvaluateFlags {
    /// Flat JSON settings or a previous manifest
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// True impedance SEIS1 section
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    impedance: Option<PathBuf>,
    /// Predicted impedance section (instead of --checkpoint and --seismic)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    predicted: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seismic: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// Training-trace step used for the split [default: 150]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
}

#[derive(Args, Serialize)]
pub struct ExportFlags {
    /// Flat JSON settings or a previous manifest
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// True impedance SEIS1 section
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    impedance: Option<PathBuf>,
    /// Predicted impedance section (instead of --checkpoint and --seismic)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    predicted: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seismic: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// Trace positions as percentages of the line [default: 20,40,60,80]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<u32>>,
    /// [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
}

#[derive(Args, Serialize)]
pub struct GradcheckFlags {
    /// Flat JSON settings or a previous manifest
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Also write gradcheck.csv and a manifest here
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// Seed for inputs, parameters and probes [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(f) => commands::generate(f),
        Command::Train(f) => commands::train(f),
        Command::Predict(f) => commands::predict(f),
        Command::Evaluate(f) => commands::evaluate(f),
        Command::Export(f) => commands::export(f),
        Command::Gradcheck(f) => commands::gradcheck(f),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
