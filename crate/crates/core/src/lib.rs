//! Multi-channel signal forecasting by masked diffusion over signal images.
//!
//! A window of `C` simultaneously sampled channels is min-max normalized per
//! channel and laid out as an `H × C` image (time top-to-bottom, channels
//! left-to-right). A small U-Net noise predictor is trained to regenerate the
//! bottom rows of that image from the clean top rows; rolling that completion
//! forward yields forecasts of arbitrary length, which a CNN-LSTM classifier
//! then screens for imminent seizures.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom of this file pick the concrete types used by the CLI.

pub mod checkpoint;
pub mod classifier;
pub mod denoiser;
pub mod diffusion;
pub mod edf;
pub mod error;
pub mod forecast;
pub mod imaging;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Real;

pub use classifier::{CnnLstm, ClassifierConfig, SeizurePrediction};
pub use denoiser::{Denoiser, DenoiserConfig, TrainConfig};
pub use diffusion::{CompletionMask, EpsModel, NoiseSchedule};
pub use edf::{EdfHeader, RecordingSession, WindowedSample};
pub use forecast::ForecastResult;
pub use imaging::{ChannelScaler, SignalImage};

/// Single precision denoiser used for training and inference.
pub type Denoiser32 = Denoiser<f32>;
/// Double precision denoiser, used for gradient checks.
pub type Denoiser64 = Denoiser<f64>;
pub type Classifier32 = CnnLstm<f32>;
pub type Classifier64 = CnnLstm<f64>;
pub type Schedule32 = NoiseSchedule<f32>;
pub type Schedule64 = NoiseSchedule<f64>;
pub type Image32 = SignalImage<f32>;
pub type Image64 = SignalImage<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
