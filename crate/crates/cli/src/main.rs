//! `eegdif`: synthesize, prepare, train, forecast, warn, evaluate and plot.

mod commands;
mod dataset;
mod plot;
mod settings;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "eegdif", version, about = "Diffusion-based multi-channel EEG forecasting and seizure early warning")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, env = "EEGDIF_SEED")]
    pub seed: Option<u64>,
    /// Flat `key = value` file; command-line flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic lag-coupled recording with seizure-like bursts as EDF plus annotations.
    Synth(SynthArgs),
    /// Cut an EDF recording into labeled windows (dataset directory).
    Prepare(PrepareArgs),
    /// Train the diffusion denoiser on a prepared dataset.
    TrainDiffusion(TrainDiffusionArgs),
    /// Train the CNN-LSTM seizure classifier on a prepared dataset.
    TrainClassifier(TrainClassifierArgs),
    /// Forecast the channels of an EDF recording past a start time.
    Forecast(ForecastArgs),
    /// Forecast and classify successive windows of a recording.
    Warn(WarnArgs),
    /// Score forecasts and/or warnings; writes `metric,channel,value` rows.
    Eval(EvalArgs),
    /// Draw a forecast CSV as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub duration_seconds: Option<f64>,
    #[arg(long)]
    pub rate: Option<f64>,
    /// Delay between neighboring channels, samples.
    #[arg(long)]
    pub lag: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub bursts_per_min: Option<f64>,
    #[arg(long)]
    pub burst_gain: Option<f64>,
    #[arg(long)]
    pub burst_seconds: Option<f64>,
    #[arg(long)]
    pub spike_amplitude: Option<f64>,
    #[arg(long)]
    pub spike_freq: Option<f64>,
    #[arg(long)]
    pub patient_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct SignalSource {
    #[arg(long)]
    pub edf: PathBuf,
    /// Seizure intervals, one `start_s end_s` pair per line.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Comma-separated channel labels, or `all` (default: the 16-channel montage).
    #[arg(long)]
    pub channels: Option<String>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub source: SignalSource,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub window_seconds: Option<f64>,
    /// Defaults to the window length.
    #[arg(long)]
    pub stride_seconds: Option<f64>,
    /// Share of windows, latest first, marked as the test split.
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainDiffusionArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Image rows (time points per image).
    #[arg(long)]
    pub image_height: Option<usize>,
    /// Defaults to half the image height.
    #[arg(long)]
    pub observed_rows: Option<usize>,
    /// Raw samples averaged into one image row.
    #[arg(long)]
    pub decimation: Option<usize>,
    #[arg(long)]
    pub base_width: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub time_embed_dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Rows between consecutive training images cut from a window.
    #[arg(long)]
    pub image_stride: Option<usize>,
    #[arg(long)]
    pub max_images: Option<usize>,
    #[arg(long)]
    pub train_steps: Option<usize>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    /// Train on every window instead of the train split only.
    #[arg(long)]
    pub all_windows: bool,
}

#[derive(Debug, Args)]
pub struct TrainClassifierArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub pool: Option<usize>,
    /// Cap on training windows; positives are kept up to half of it.
    #[arg(long)]
    pub max_windows: Option<usize>,
    #[arg(long)]
    pub all_windows: bool,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    /// Reverse-diffusion steps per generated block.
    #[arg(long)]
    pub num_steps: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Denoiser checkpoint (not needed for `--method lstm`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub source: SignalSource,
    /// Start of the observed window, seconds.
    #[arg(long)]
    pub start_seconds: Option<f64>,
    #[arg(long, conflicts_with = "horizon")]
    pub horizon_seconds: Option<f64>,
    /// Horizon in samples.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Rate used to convert `--horizon-seconds` to samples (default: the recording's).
    #[arg(long)]
    pub rate: Option<f64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Condition every block on the true preceding rows.
    #[arg(long)]
    pub teacher_forced: bool,
    /// `diffusion` or `lstm` (per-channel recurrent baseline trained on the recording before the start).
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub baseline_epochs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WarnArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub classifier: PathBuf,
    #[command(flatten)]
    pub source: SignalSource,
    #[arg(long)]
    pub start_seconds: Option<f64>,
    #[arg(long)]
    pub end_seconds: Option<f64>,
    /// Forecast length in samples (default: the classifier's training window).
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Defaults to the horizon.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Classify the observed window followed by the forecast instead of the forecast alone.
    #[arg(long)]
    pub include_observed: bool,
    #[arg(long)]
    pub max_windows: Option<usize>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Forecast CSV; truth comes from its `value_true` column unless `--truth` is given.
    #[arg(long)]
    pub forecast: Option<PathBuf>,
    /// Forecast-shaped CSV whose `value_pred` column holds the true values.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Competing forecast (same truth) for a paired t-test over channel MAEs.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Warning CSV with `probability` and `label` columns.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Competing warning CSV for a DeLong comparison.
    #[arg(long)]
    pub compare_scores: Option<PathBuf>,
    /// Decision threshold for the classification report.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub forecast: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated channels to draw (default: the first four).
    #[arg(long)]
    pub channels: Option<String>,
    /// Label the time axis in seconds at this rate.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub max_points: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
