//! Per-channel min-max normalization and the signal ↔ image layout.
//!
//! Signals are `C × N` (channels by time). A signal image is `H × W` with
//! pixel `(j, i)` holding normalized channel `i` at time `j`, so time runs
//! top to bottom and each column is one channel.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Stored per-channel extrema used to map signals into `[0, 1]` and back.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScaler<T> {
    min: Vec<T>,
    max: Vec<T>,
}

impl<T: Real> ChannelScaler<T> {
    pub fn new(min: Vec<T>, max: Vec<T>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::shape(min.len(), max.len()));
        }
        if min.iter().zip(&max).any(|(lo, hi)| !(hi >= lo)) {
            return Err(Error::invalid("scaler max must be >= min for every channel"));
        }
        Ok(Self { min, max })
    }

    /// Computes extrema of each row of a `C × N` signal matrix.
    pub fn fit(signals: &Matrix<T>) -> Result<Self> {
        if signals.rows() == 0 || signals.cols() == 0 {
            return Err(Error::invalid("cannot normalize an empty signal matrix"));
        }
        if !signals.is_finite() {
            return Err(Error::NonFinite("signals"));
        }
        let (min, max) = signals
            .row_iter()
            .map(|row| {
                row.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
            })
            .unzip();
        Ok(Self { min, max })
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[T] {
        &self.min
    }

    pub fn max(&self) -> &[T] {
        &self.max
    }

    fn is_degenerate(&self, ch: usize) -> bool {
        self.max[ch] <= self.min[ch]
    }

    /// Maps a `C × N` matrix into normalized units with these extrema.
    /// Values outside the fitted range land outside `[0, 1]`.
    pub fn apply(&self, signals: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_channels(signals)?;
        let half = T::lit(0.5);
        Ok(Matrix::from_fn(signals.rows(), signals.cols(), |c, j| {
            if self.is_degenerate(c) {
                half
            } else {
                (signals[(c, j)] - self.min[c]) / (self.max[c] - self.min[c])
            }
        }))
    }

    /// Inverse of [`apply`](Self::apply); degenerate channels come back as their minimum.
    pub fn invert(&self, normalized: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_channels(normalized)?;
        Ok(Matrix::from_fn(normalized.rows(), normalized.cols(), |c, j| {
            if self.is_degenerate(c) {
                self.min[c]
            } else {
                normalized[(c, j)] * (self.max[c] - self.min[c]) + self.min[c]
            }
        }))
    }

    fn check_channels(&self, m: &Matrix<T>) -> Result<()> {
        if m.rows() != self.channels() {
            return Err(Error::shape(
                format!("{} channels", self.channels()),
                format!("{} channels", m.rows()),
            ));
        }
        Ok(())
    }
}

/// `H × W` image of normalized signals; rows are time points, columns channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalImage<T> {
    pixels: Matrix<T>,
}

impl<T: Real> SignalImage<T> {
    pub fn from_pixels(pixels: Matrix<T>) -> Self {
        Self { pixels }
    }

    pub fn pixels(&self) -> &Matrix<T> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Matrix<T> {
        self.pixels
    }

    pub fn height(&self) -> usize {
        self.pixels.rows()
    }

    pub fn width(&self) -> usize {
        self.pixels.cols()
    }
}

/// Min-max normalizes every channel of a `C × N` matrix into `[0, 1]`.
/// A constant channel maps to 0.5.
pub fn normalize<T: Real>(signals: &Matrix<T>) -> Result<(Matrix<T>, ChannelScaler<T>)> {
    let scaler = ChannelScaler::fit(signals)?;
    let normalized = scaler.apply(signals)?;
    Ok((normalized, scaler))
}

pub fn denormalize<T: Real>(normalized: &Matrix<T>, scaler: &ChannelScaler<T>) -> Result<Matrix<T>> {
    scaler.invert(normalized)
}

/// Lays out `C × H` normalized signals as an `H × C` image.
pub fn to_image<T: Real>(normalized: &Matrix<T>) -> SignalImage<T> {
    SignalImage::from_pixels(normalized.transpose())
}

/// Recovers `C × H` signals from an image.
pub fn from_image<T: Real>(image: &SignalImage<T>) -> Matrix<T> {
    image.pixels.transpose()
}
