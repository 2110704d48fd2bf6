//! CNN-LSTM seizure classifier and the forecast-then-classify early warning.
//!
//! Each window is standardized per channel (zero mean, unit variance) before
//! it reaches the network, so the classifier only sees waveform shape:
//!
//! ```text
//! [C, T] ─ conv5 → 16 ─ ReLU ─ pool ─ conv5 → 32 ─ ReLU ─ pool ─ LSTM(64) ─ linear → logit
//! ```

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checkpoint;
use crate::diffusion::{CompletionMask, EpsModel, NoiseSchedule};
use crate::edf::WindowedSample;
use crate::error::{Error, Result};
use crate::forecast::{forecast, ForecastOptions};
use crate::matrix::Matrix;
use crate::nn::graph::sigmoid;
use crate::nn::{Adam, Graph, Init, Layout, LstmCell, ParamRef, Var};
use crate::scalar::Real;

const CHECKPOINT_KIND: &str = "classifier";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub channels: usize,
    pub kernel: usize,
    pub conv1: usize,
    pub conv2: usize,
    /// Temporal average-pooling factor after each convolution.
    pub pool: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub threshold: f64,
    pub seed: u64,
    /// Window length seen in training, in samples (0 until trained).
    #[serde(default)]
    pub window: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            channels: 16,
            kernel: 5,
            conv1: 16,
            conv2: 32,
            pool: 2,
            hidden: 64,
            epochs: 20,
            batch_size: 16,
            learning_rate: 1e-3,
            threshold: 0.5,
            seed: 0,
            window: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.channels, self.conv1, self.conv2, self.pool, self.hidden, self.batch_size].contains(&0) {
            return Err(Error::invalid("classifier sizes must be positive"));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::invalid("kernel width must be odd"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid("threshold must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Shortest window that leaves at least one recurrent step.
    pub fn min_len(&self) -> usize {
        self.pool * self.pool
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeizurePrediction {
    pub probability: f64,
    pub label: u8,
    pub threshold: f64,
}

impl SeizurePrediction {
    pub fn new(probability: f64, threshold: f64) -> Self {
        Self {
            probability,
            label: u8::from(probability >= threshold),
            threshold,
        }
    }
}

/// Zero mean, unit variance per channel; constant channels become zeros.
pub fn standardize<T: Real>(signals: &Matrix<T>) -> Matrix<T> {
    let n = T::from_usize_lossy(signals.cols().max(1));
    let mut out = signals.clone();
    for c in 0..signals.rows() {
        let row = out.row_mut(c);
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let inv = if var > T::lit(1e-12) { T::one() / var.sqrt() } else { T::zero() };
        row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
    }
    out
}

#[derive(Debug, Clone)]
pub struct CnnLstm<T> {
    config: ClassifierConfig,
    conv1: (ParamRef, ParamRef),
    conv2: (ParamRef, ParamRef),
    lstm: LstmCell,
    head: (ParamRef, ParamRef),
    params: Vec<T>,
}

impl<T: Real> CnnLstm<T> {
    pub fn init(config: ClassifierConfig) -> Result<Self> {
        config.validate()?;
        let k = config.kernel;
        let mut l = Layout::new();
        let conv1 = (
            l.weight("conv1.w", &[config.conv1, config.channels, k], config.channels * k),
            l.add("conv1.b", &[config.conv1], Init::Zeros),
        );
        let conv2 = (
            l.weight("conv2.w", &[config.conv2, config.conv1, k], config.conv1 * k),
            l.add("conv2.b", &[config.conv2], Init::Zeros),
        );
        let lstm = LstmCell::register(&mut l, "lstm", config.conv2, config.hidden);
        let head = (
            l.add("head.w", &[1, config.hidden], Init::Normal((1.0 / config.hidden as f64).sqrt())),
            l.add("head.b", &[1], Init::Zeros),
        );
        let mut params: Vec<T> = l.initialize(&mut ChaCha8Rng::seed_from_u64(config.seed));
        for i in lstm.forget_bias_range() {
            params[i] = T::one();
        }
        Ok(Self { config, conv1, conv2, lstm, head, params })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check(&self, signals: &Matrix<T>) -> Result<()> {
        if signals.rows() != self.config.channels {
            return Err(Error::shape(format!("{} channels", self.config.channels), format!("{}", signals.rows())));
        }
        if signals.cols() < self.config.min_len() {
            return Err(Error::shape(
                format!("at least {} samples", self.config.min_len()),
                format!("{}", signals.cols()),
            ));
        }
        if !signals.is_finite() {
            return Err(Error::NonFinite("classifier input"));
        }
        Ok(())
    }

    fn logit(&self, g: &mut Graph<T>, signals: &Matrix<T>) -> Var {
        let x = standardize(signals);
        let x = g.input(&[x.rows(), x.cols()], x.into_vec());
        let (w, b) = (self.conv1.0.var(g), self.conv1.1.var(g));
        let h = g.conv1d(x, w, b);
        let h = g.relu(h);
        let h = g.avg_pool1d(h, self.config.pool);
        let (w, b) = (self.conv2.0.var(g), self.conv2.1.var(g));
        let h = g.conv1d(h, w, b);
        let h = g.relu(h);
        let h = g.avg_pool1d(h, self.config.pool);
        let h = self.lstm.sequence(g, h);
        let (w, b) = (self.head.0.var(g), self.head.1.var(g));
        g.linear(h, w, b)
    }

    /// Seizure probability for one `C × T` window.
    pub fn probability(&self, signals: &Matrix<T>) -> Result<f64> {
        self.check(signals)?;
        let mut g = Graph::new(&self.params);
        let z = self.logit(&mut g, signals);
        Ok(sigmoid(g.value(z)[0]).as_f64())
    }

    /// Binary cross-entropy on one window; adds `scale · ∂loss/∂θ` into `grad`.
    pub fn loss_and_grad(&self, signals: &Matrix<T>, label: u8, scale: T, grad: &mut [T]) -> Result<T> {
        self.check(signals)?;
        let mut g = Graph::new(&self.params);
        let z = self.logit(&mut g, signals);
        let loss = g.bce_logit(z, if label == 1 { T::one() } else { T::zero() });
        g.backward(loss, scale, grad);
        Ok(g.value(loss)[0])
    }

    pub fn to_checkpoint(&self) -> Result<Vec<u8>> {
        let meta = json!({ "config": self.config, "preprocessing": "per-channel standardization per window" });
        let params: Vec<f32> = self.params.iter().map(|p| p.as_f64() as f32).collect();
        checkpoint::encode(CHECKPOINT_KIND, meta, &params)
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Self> {
        let (meta, params) = checkpoint::decode(bytes, CHECKPOINT_KIND)?;
        let config: ClassifierConfig = serde_json::from_value(meta["config"].clone())?;
        let mut model = Self::init(config)?;
        if params.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "config implies {} parameters, file holds {}",
                model.params.len(),
                params.len()
            )));
        }
        model.params = params.into_iter().map(|p| T::lit(f64::from(p))).collect();
        Ok(model)
    }
}

/// Trains a fresh classifier on labeled windows; returns it with the mean
/// loss of every epoch.
pub fn train_classifier<T: Real>(samples: &[WindowedSample], config: &ClassifierConfig) -> Result<(CnnLstm<T>, Vec<T>)> {
    if samples.is_empty() {
        return Err(Error::invalid("no training windows"));
    }
    let positives = samples.iter().filter(|s| s.label == 1).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::invalid("training set must contain both classes"));
    }
    let config = &ClassifierConfig { window: samples[0].data.cols(), ..*config };
    let mut model = CnnLstm::<T>::init(*config)?;
    if config.epochs == 0 {
        log::warn!("classifier trained for 0 epochs: returning the initialized model");
        return Ok((model, Vec::new()));
    }
    let data: Vec<Matrix<T>> = samples.iter().map(|s| s.data.cast()).collect();
    for d in &data {
        model.check(d)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut opt = Adam::new(model.params.len(), T::lit(config.learning_rate));
    let mut grad = vec![T::zero(); model.params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = T::zero();
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let scale = T::one() / T::from_usize_lossy(batch.len());
            for &i in batch {
                total += model.loss_and_grad(&data[i], samples[i].label, scale, &mut grad)?;
            }
            opt.step(&mut model.params, &grad);
        }
        let mean = total / T::from_usize_lossy(data.len());
        if !mean.is_finite() {
            return Err(Error::NonFinite("classifier loss"));
        }
        log::debug!("classifier epoch {epoch}: loss {mean}");
        curve.push(mean);
    }
    Ok((model, curve))
}

pub fn predict_seizure<T: Real>(model: &CnnLstm<T>, signals: &Matrix<T>) -> Result<SeizurePrediction> {
    Ok(SeizurePrediction::new(model.probability(signals)?, model.config.threshold))
}

/// What the classifier sees in [`early_warning`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum WarningInput {
    /// The generated future only.
    #[default]
    Generated,
    /// Observed window followed by the generated future.
    ObservedAndGenerated,
}

/// Forecasts `horizon` samples and classifies the result.
#[allow(clippy::too_many_arguments)]
pub fn early_warning<T: Real, M: EpsModel<T> + ?Sized>(
    denoiser: &M,
    mask: &CompletionMask,
    sched: &NoiseSchedule<T>,
    model: &CnnLstm<T>,
    observed: &Matrix<T>,
    horizon: usize,
    threshold: f64,
    opts: &ForecastOptions,
    input: WarningInput,
) -> Result<SeizurePrediction> {
    if horizon == 0 {
        return Err(Error::invalid("early warning needs a positive horizon"));
    }
    let future = forecast(denoiser, mask, sched, observed, horizon, opts)?.generated;
    let signals = match input {
        WarningInput::Generated => future,
        WarningInput::ObservedAndGenerated => Matrix::from_fn(observed.rows(), observed.cols() + horizon, |c, j| {
            if j < observed.cols() {
                observed[(c, j)]
            } else {
                future[(c, j - observed.cols())]
            }
        }),
    };
    Ok(SeizurePrediction::new(model.probability(&signals)?, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ClassifierConfig {
        ClassifierConfig {
            channels: 2,
            kernel: 3,
            conv1: 3,
            conv2: 2,
            pool: 2,
            hidden: 3,
            epochs: 5,
            batch_size: 4,
            seed: 1,
            ..Default::default()
        }
    }

    fn window(label: u8, phase: f64) -> WindowedSample {
        let data = Matrix::from_fn(2, 16, |c, j| {
            let t = j as f64 + phase + c as f64;
            if label == 1 { (t * 2.5).sin() * 3.0 } else { (t * 0.3).sin() }
        });
        WindowedSample { data, label, patient_id: "p".into(), start_time: 0.0 }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = CnnLstm::<f64>::init(tiny()).unwrap();
        let x = window(1, 0.3).data;
        let mut grad = vec![0.0; m.param_count()];
        m.loss_and_grad(&x, 1, 1.0, &mut grad).unwrap();
        let h = 1e-6;
        for i in 0..m.param_count() {
            let mut p = m.clone();
            p.params[i] += h;
            let mut sink = vec![0.0; m.param_count()];
            let up = p.loss_and_grad(&x, 1, 1.0, &mut sink).unwrap();
            p.params[i] -= 2.0 * h;
            let down = p.loss_and_grad(&x, 1, 1.0, &mut sink).unwrap();
            let fd = (up - down) / (2.0 * h);
            let diff = (fd - grad[i]).abs();
            assert!(diff < 1e-7 || diff / fd.abs().max(grad[i].abs()) < 1e-4, "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn label_follows_threshold() {
        assert_eq!(SeizurePrediction::new(0.5, 0.5).label, 1);
        assert_eq!(SeizurePrediction::new(0.4999, 0.5).label, 0);
        assert_eq!(SeizurePrediction::new(0.0, 0.0).label, 1);
    }

    #[test]
    fn probability_in_unit_interval_and_deterministic() {
        let m = CnnLstm::<f64>::init(tiny()).unwrap();
        let x = window(0, 1.0).data.map(|v| v * 1e6);
        let p = predict_seizure(&m, &x).unwrap();
        assert!((0.0..=1.0).contains(&p.probability));
        assert_eq!(p, predict_seizure(&m, &x).unwrap());
        assert!(predict_seizure(&m, &Matrix::zeros(3, 16)).is_err());
        assert!(predict_seizure(&m, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn training_rules() {
        let one_class: Vec<_> = (0..4).map(|i| window(0, i as f64)).collect();
        assert!(train_classifier::<f64>(&one_class, &tiny()).is_err());
        let both: Vec<_> = (0..8).map(|i| window((i % 2) as u8, i as f64)).collect();
        let (untrained, curve) = train_classifier::<f64>(&both, &ClassifierConfig { epochs: 0, ..tiny() }).unwrap();
        assert!(curve.is_empty());
        assert_eq!(untrained.params(), CnnLstm::<f64>::init(tiny()).unwrap().params());
        assert_eq!(untrained.config().window, 16);
        let (a, ca) = train_classifier::<f64>(&both, &tiny()).unwrap();
        let (b, cb) = train_classifier::<f64>(&both, &tiny()).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(ca, cb);
        assert_eq!(ca.len(), 5);
    }

    #[test]
    fn standardize_per_channel() {
        let m = Matrix::from_rows(&[vec![1.0, 3.0], vec![5.0, 5.0]]).unwrap();
        let s = standardize(&m);
        assert_eq!(s.row(0), &[-1.0, 1.0]);
        assert_eq!(s.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn early_warning_is_forecast_then_classify() {
        let m = CnnLstm::<f64>::init(tiny()).unwrap();
        let mask = CompletionMask::new(8, 2, 4).unwrap();
        let sched = NoiseSchedule::linear(50, 1e-4, 0.02).unwrap();
        let den = |x: &Matrix<f64>, _t: usize, _m: &CompletionMask| Ok(x.map(|v| 0.5 * v));
        let obs = window(1, 0.0).data.columns(0, 4).unwrap();
        let opts = ForecastOptions { num_steps: 4, seed: 3, ..Default::default() };
        let w = early_warning(&den, &mask, &sched, &m, &obs, 12, 0.5, &opts, WarningInput::Generated).unwrap();
        let future = forecast(&den, &mask, &sched, &obs, 12, &opts).unwrap().generated;
        assert_eq!(w, predict_seizure(&m, &future).unwrap());
        assert!(early_warning(&den, &mask, &sched, &m, &obs, 0, 0.5, &opts, WarningInput::Generated).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let m = CnnLstm::<f32>::init(tiny()).unwrap();
        let back = CnnLstm::<f32>::from_checkpoint(&m.to_checkpoint().unwrap()).unwrap();
        assert_eq!(back.params(), m.params());
        let d = crate::denoiser::Denoiser::<f32>::init(Default::default()).unwrap();
        let bytes = d.to_checkpoint(&Default::default()).unwrap();
        assert!(CnnLstm::<f32>::from_checkpoint(&bytes).is_err());
    }
}
