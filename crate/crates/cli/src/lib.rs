//! Command-line workflows: train, evaluate, explain, perturb, freqscale and
//! synth, all driven by one TOML run configuration and one seed.

pub mod commands;
pub mod config;
pub mod data;
pub mod manifest;
pub mod render;

use std::ffi::OsString;
use std::path::PathBuf;

use audiolrp::{Error, ErrorClass};
use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "audiolrp", version, about = "Audio CNNs with layer-wise relevance propagation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured top-level seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Cross-validation rotation; defaults to the first configured one.
    #[arg(long)]
    pub fold: Option<usize>,
    /// Checkpoint to load instead of `<out>/model_fold<K>.ckpt`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model per rotation and write checkpoints and logs.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train only this rotation.
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Test accuracy of the trained models, per rotation and summarized.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Relevance map and heatmap for one input.
    Explain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Index into the test split.
        #[arg(long, conflicts_with = "input")]
        record: Option<usize>,
        /// A WAV file (8 or 48 kHz, mono, 16-bit).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Class to explain; defaults to the predicted one.
        #[arg(long)]
        target: Option<usize>,
    },
    /// Accuracy under growing sample-zeroing perturbations.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Accuracy of a spectrogram gender model under frequency-axis scaling.
    Freqscale {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Overrides the configured factors.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        factors: Option<Vec<f64>>,
    },
    /// Write a synthetic dataset in the AudioMNIST directory layout.
    Synth {
        #[command(flatten)]
        common: Common,
    },
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Data => EXIT_DATA,
        ErrorClass::Numeric => EXIT_NUMERIC,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status. Diagnostics go to stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
