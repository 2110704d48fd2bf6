//! Synthetic coupled multi-channel signals, seizure-like bursts and EDF fixtures.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::edf::{encode_edf, EncodeRange, RecordingSession};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Number of sinusoids in the base mixture.
const MIXTURE_COMPONENTS: usize = 24;
/// Target RMS amplitude of the base channel, µV.
const BASE_RMS: f64 = 50.0;

/// Band-limited sinusoid mixture on channel 0; channel `k` is channel `k - 1`
/// delayed by `lag` samples plus white noise of std `noise_sd`.
///
/// The mixture draws frequencies uniformly from `[0.5 Hz, min(12 Hz, 0.2·rate)]`.
pub fn gen_coupled(
    channels: usize,
    samples: usize,
    rate: f64,
    lag: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Matrix<f64>> {
    if channels == 0 || samples == 0 {
        return Err(Error::invalid("channels and samples must be at least 1"));
    }
    if !(rate > 0.0) || !(noise_sd >= 0.0) {
        return Err(Error::invalid("rate must be positive and noise_sd non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = (channels - 1) * lag;
    let total = samples + offset;

    let f_hi = (0.2 * rate).min(12.0).max(0.6);
    let comps: Vec<(f64, f64, f64)> = (0..MIXTURE_COMPONENTS)
        .map(|_| {
            let f = rng.gen_range(0.5..f_hi);
            let a = rng.gen_range(0.5..1.0);
            let phase = rng.gen_range(0.0..2.0 * PI);
            (f, a, phase)
        })
        .collect();
    let power: f64 = comps.iter().map(|(_, a, _)| a * a / 2.0).sum();
    let scale = BASE_RMS / power.sqrt();
    let base: Vec<f64> = (0..total)
        .map(|n| {
            let t = n as f64 / rate;
            scale * comps.iter().map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum::<f64>()
        })
        .collect();

    let noise = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut prev = base;
    let mut out = Matrix::zeros(channels, samples);
    out.row_mut(0).copy_from_slice(&prev[offset..]);
    for k in 1..channels {
        let mut ext = vec![0.0; total];
        for m in k * lag..total {
            let e = if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            ext[m] = prev[m - lag] + e;
        }
        out.row_mut(k).copy_from_slice(&ext[offset..]);
        prev = ext;
    }
    Ok(out)
}

/// Parameters of the injected seizure-like bursts.
#[derive(Debug, Clone, Copy)]
pub struct BurstConfig {
    /// Sampling rate of the matrix, Hz.
    pub rate: f64,
    /// Mean number of bursts per minute.
    pub events_per_min: f64,
    /// Amplitude multiplier inside a burst.
    pub gain: f64,
    /// Peak amplitude of the superposed spike train, µV.
    pub spike_amplitude: f64,
    /// Spike repetition frequency, Hz.
    pub spike_freq: f64,
    /// Burst length, seconds.
    pub duration: f64,
}

impl Default for BurstConfig {
    fn default() -> Self {
        Self {
            rate: 128.0,
            events_per_min: 2.0,
            gain: 2.0,
            spike_amplitude: 120.0,
            spike_freq: 20.0,
            duration: 5.0,
        }
    }
}

/// Injects bursts at Poisson-distributed onsets and returns the modified
/// matrix with the `[start, end)` sample intervals that were touched.
///
/// Inside a burst every channel is scaled by `gain` and a rectified sinusoid
/// spike train at `spike_freq` is added.
pub fn gen_events(matrix: &Matrix<f64>, cfg: &BurstConfig, seed: u64) -> Result<(Matrix<f64>, Vec<(usize, usize)>)> {
    if !(cfg.events_per_min >= 0.0) || !(cfg.rate > 0.0) || !(cfg.duration > 0.0) {
        return Err(Error::invalid("burst rate must be >= 0, sampling rate and duration > 0"));
    }
    let mut out = matrix.clone();
    if cfg.events_per_min == 0.0 {
        return Ok((out, Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = matrix.cols();
    let burst_len = ((cfg.duration * cfg.rate).round() as usize).max(1);
    let gap = Exp::new(cfg.events_per_min / 60.0).expect("positive rate");
    let mut intervals = Vec::new();
    let mut t = gap.sample(&mut rng);
    loop {
        let start = (t * cfg.rate).floor() as usize;
        if start >= n {
            break;
        }
        let end = (start + burst_len).min(n);
        intervals.push((start, end));
        t = end as f64 / cfg.rate + gap.sample(&mut rng);
    }

    for &(start, end) in &intervals {
        for c in 0..out.rows() {
            let row = out.row_mut(c);
            for (j, v) in row[start..end].iter_mut().enumerate() {
                let tau = j as f64 / cfg.rate;
                // |sin(π f τ)| peaks `f` times per second.
                let spike = cfg.spike_amplitude * (PI * cfg.spike_freq * tau).sin().abs();
                *v = *v * cfg.gain + spike;
            }
        }
    }
    Ok((out, intervals))
}

/// Writes `session` to `path` as EDF with a ±1000 µV physical range and
/// returns the number of bytes written.
pub fn write_edf(session: &RecordingSession, path: impl AsRef<Path>) -> Result<usize> {
    let bytes = encode_edf(session, EncodeRange::default())?;
    std::fs::write(path, &bytes)?;
    Ok(bytes.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edf::{parse_edf, window_signals, Channel};

    fn corr_at(a: &[f64], b: &[f64], off: usize) -> f64 {
        // Correlation of a[n] with b[n + off].
        let n = a.len() - off;
        let (x, y) = (&a[..n], &b[off..off + n]);
        let mx = x.iter().sum::<f64>() / n as f64;
        let my = y.iter().sum::<f64>() / n as f64;
        let cov: f64 = x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum();
        let vx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn deterministic_for_seed() {
        let a = gen_coupled(4, 300, 128.0, 3, 0.0, 7).unwrap();
        let b = gen_coupled(4, 300, 128.0, 3, 0.0, 7).unwrap();
        assert_eq!(a, b);
        let c = gen_coupled(4, 300, 128.0, 3, 1.0, 8).unwrap();
        let d = gen_coupled(4, 300, 128.0, 3, 1.0, 8).unwrap();
        assert_eq!(c, d);
        assert_ne!(a, gen_coupled(4, 300, 128.0, 3, 0.0, 9).unwrap());
    }

    #[test]
    fn exact_delay_without_noise() {
        let lag = 5;
        let m = gen_coupled(3, 400, 128.0, lag, 0.0, 1).unwrap();
        for k in 1..3 {
            for n in lag..400 {
                assert_eq!(m[(k, n)], m[(k - 1, n - lag)]);
            }
        }
    }

    #[test]
    fn cross_correlation_peaks_at_lag() {
        let lag = 4;
        let m = gen_coupled(2, 2000, 64.0, lag, 0.0, 3).unwrap();
        let (a, b) = (m.row(0), m.row(1));
        let best = (0..20)
            .max_by(|&p, &q| corr_at(a, b, p).partial_cmp(&corr_at(a, b, q)).unwrap())
            .unwrap();
        assert_eq!(best, lag);
    }

    #[test]
    fn adjacent_channels_more_coupled_than_distant() {
        let lag = 2;
        let m = gen_coupled(3, 3000, 64.0, lag, 2.0, 11).unwrap();
        let near = corr_at(m.row(0), m.row(1), lag);
        let far = corr_at(m.row(0), m.row(2), lag);
        assert!(near > far, "{near} vs {far}");
    }

    #[test]
    fn single_channel_has_target_scale() {
        let m = gen_coupled(1, 4096, 128.0, 3, 5.0, 2).unwrap();
        assert_eq!(m.rows(), 1);
        let rms = (m.row(0).iter().map(|v| v * v).sum::<f64>() / 4096.0).sqrt();
        assert!(rms > 20.0 && rms < 100.0, "rms {rms}");
    }

    #[test]
    fn zero_rate_means_no_events() {
        let m = gen_coupled(2, 500, 128.0, 1, 0.0, 2).unwrap();
        let cfg = BurstConfig { events_per_min: 0.0, ..Default::default() };
        let (out, iv) = gen_events(&m, &cfg, 1).unwrap();
        assert_eq!(out, m);
        assert!(iv.is_empty());
    }

    #[test]
    fn identity_gain_and_no_spikes() {
        let m = gen_coupled(2, 128 * 120, 128.0, 1, 0.0, 2).unwrap();
        let cfg = BurstConfig { gain: 1.0, spike_amplitude: 0.0, events_per_min: 6.0, ..Default::default() };
        let (out, iv) = gen_events(&m, &cfg, 1).unwrap();
        assert!(!iv.is_empty());
        assert_eq!(out, m);
    }

    #[test]
    fn bursts_change_only_intervals_and_label_windows() {
        let rate = 128.0;
        let m = gen_coupled(2, 128 * 300, rate, 1, 0.0, 2).unwrap();
        let cfg = BurstConfig { rate, events_per_min: 3.0, ..Default::default() };
        let (out, iv) = gen_events(&m, &cfg, 5).unwrap();
        assert!(!iv.is_empty());
        let inside = |j: usize| iv.iter().any(|&(s, e)| j >= s && j < e);
        for j in 0..m.cols() {
            if !inside(j) {
                assert_eq!(out[(0, j)], m[(0, j)]);
            }
        }
        let windows = window_signals(&out, 256, 128, &iv, rate, "s").unwrap();
        for (k, w) in windows.iter().enumerate() {
            let (s, e) = (k * 128, k * 128 + 256);
            let expect = (s..e).any(inside) as u8;
            assert_eq!(w.label, expect);
        }
        assert!(windows.iter().any(|w| w.label == 1));
        assert!(windows.iter().any(|w| w.label == 0));
    }

    #[test]
    fn write_edf_roundtrip_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let m = gen_coupled(2, 512, 512.0, 1, 0.0, 4).unwrap();
        let session = RecordingSession::from_matrix("S1", &["Fp1", "F3"], 512.0, &m).unwrap();
        let path = dir.path().join("x.edf");
        let n = write_edf(&session, &path).unwrap();
        assert_eq!(n, 2 * 256 + 256 + 2 * 512 * 2);
        let parsed = parse_edf(&std::fs::read(&path).unwrap()).unwrap();
        let lsb = 2000.0 / 65534.0;
        for (a, b) in parsed.channels.iter().zip(&session.channels) {
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert!((x - y).abs() <= 0.5 * lsb + 1e-9);
            }
        }
        let empty = RecordingSession::new("e", vec![]);
        assert!(write_edf(&empty, dir.path().join("e.edf")).is_err());
        let bad = RecordingSession::new(
            "b",
            vec![Channel { label: "A".into(), rate: 1.0, samples: vec![2000.0] }],
        );
        assert!(write_edf(&bad, dir.path().join("b.edf")).is_err());
    }
}
