//! Rolling masked completion for arbitrary-horizon forecasts, and the
//! per-channel recurrent baseline.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{complete_image, CompletionMask, EpsModel, NoiseSchedule, DEFAULT_SAMPLE_STEPS};
use crate::error::{Error, Result};
use crate::imaging::{to_image, ChannelScaler, SignalImage};
use crate::matrix::Matrix;
use crate::metrics::{regression_report, RegressionReport};
use crate::nn::{Adam, Graph, Init, Layout, LstmCell, ParamRef};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastOptions {
    /// Reverse-diffusion steps per completed block.
    pub num_steps: usize,
    pub eta: f64,
    pub seed: u64,
    /// Raw samples per image row. Observed input is block-averaged by this
    /// factor and generated rows are held for `decimation` samples.
    pub decimation: usize,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        Self {
            num_steps: DEFAULT_SAMPLE_STEPS,
            eta: 0.0,
            seed: 0,
            decimation: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMetrics {
    pub per_channel: Vec<RegressionReport>,
    pub mean_mae: f64,
    pub mean_mse: f64,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone)]
pub struct ForecastResult<T> {
    /// `C × horizon`, physical units, channels in input order.
    pub generated: Matrix<T>,
    pub horizon: usize,
    /// Number of masked completions that were run.
    pub iterations: usize,
    pub metrics: Option<ChannelMetrics>,
}

impl<T: Real> ForecastResult<T> {
    /// Scores the forecast against `truth` (`C × horizon`) and stores the result.
    pub fn evaluate(&mut self, truth: &Matrix<T>) -> Result<&ChannelMetrics> {
        self.metrics = Some(channel_metrics(&self.generated, truth)?);
        Ok(self.metrics.as_ref().expect("just set"))
    }
}

/// Per-channel regression reports and their channel average.
pub fn channel_metrics<T: Real>(pred: &Matrix<T>, truth: &Matrix<T>) -> Result<ChannelMetrics> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(
            format!("{}x{}", pred.rows(), pred.cols()),
            format!("{}x{}", truth.rows(), truth.cols()),
        ));
    }
    if pred.rows() == 0 {
        return Err(Error::invalid("no channels to score"));
    }
    let per_channel = (0..pred.rows())
        .map(|c| {
            let p: Vec<f64> = pred.row(c).iter().map(|v| v.as_f64()).collect();
            let t: Vec<f64> = truth.row(c).iter().map(|v| v.as_f64()).collect();
            regression_report(&p, &t)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_channel.len() as f64;
    Ok(ChannelMetrics {
        mean_mae: per_channel.iter().map(|r| r.mae).sum::<f64>() / n,
        mean_mse: per_channel.iter().map(|r| r.mse).sum::<f64>() / n,
        mean_rmse: per_channel.iter().map(|r| r.rmse).sum::<f64>() / n,
        per_channel,
    })
}

/// Averages non-overlapping runs of `factor` samples; a ragged tail is dropped.
pub fn decimate<T: Real>(signals: &Matrix<T>, factor: usize) -> Result<Matrix<T>> {
    if factor == 0 {
        return Err(Error::invalid("decimation factor must be at least 1"));
    }
    let n = signals.cols() / factor;
    let inv = T::one() / T::from_usize_lossy(factor);
    Ok(Matrix::from_fn(signals.rows(), n, |c, j| {
        signals.row(c)[j * factor..(j + 1) * factor].iter().copied().sum::<T>() * inv
    }))
}

/// Sample-and-hold expansion by `factor`, truncated to `len` columns.
pub fn hold<T: Real>(signals: &Matrix<T>, factor: usize, len: usize) -> Matrix<T> {
    Matrix::from_fn(signals.rows(), len, |c, j| signals[(c, j / factor)])
}

/// Cuts a `C × N` series into `H`-row signal images, each min-max
/// normalized on its own.
pub fn training_images<T: Real>(
    series: &Matrix<T>,
    height: usize,
    stride: usize,
) -> Result<Vec<SignalImage<T>>> {
    if height == 0 || stride == 0 {
        return Err(Error::invalid("height and stride must be positive"));
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + height <= series.cols() {
        let window = series.columns(start, height)?;
        let scaler = ChannelScaler::fit(&window)?;
        out.push(to_image(&scaler.apply(&window)?));
        start += stride;
    }
    Ok(out)
}

struct Roller<'a, T, M: ?Sized> {
    model: &'a M,
    mask: &'a CompletionMask,
    sched: &'a NoiseSchedule<T>,
    opts: ForecastOptions,
    rng: ChaCha8Rng,
}

impl<T: Real, M: EpsModel<T> + ?Sized> Roller<'_, T, M> {
    /// Completes one image whose top rows are `context` (`H_obs × C`,
    /// normalized) and returns the generated rows.
    fn block(&mut self, context: &Matrix<T>) -> Result<Matrix<T>> {
        let (h, obs) = (self.mask.height(), self.mask.observed_rows());
        let w = context.cols();
        let mut pixels = Matrix::zeros(h, w);
        pixels.as_mut_slice()[..obs * w].copy_from_slice(context.as_slice());
        let image = SignalImage::from_pixels(pixels);
        let done = complete_image(self.model, &image, self.mask, self.sched, self.opts.num_steps, T::lit(self.opts.eta), &mut self.rng)?;
        done.pixels().row_range(obs, h - obs)
    }
}

fn check_request<T: Real>(mask: &CompletionMask, observed: &Matrix<T>, opts: &ForecastOptions) -> Result<()> {
    if opts.decimation == 0 {
        return Err(Error::invalid("decimation factor must be at least 1"));
    }
    let want = mask.observed_rows() * opts.decimation;
    if observed.cols() != want {
        return Err(Error::shape(
            format!("{} observed samples ({} rows x decimation {})", want, mask.observed_rows(), opts.decimation),
            format!("{}", observed.cols()),
        ));
    }
    if observed.rows() != mask.width() {
        return Err(Error::shape(format!("{} channels", mask.width()), format!("{}", observed.rows())));
    }
    if !observed.is_finite() {
        return Err(Error::NonFinite("observed signals"));
    }
    Ok(())
}

/// Forecasts `horizon` samples past `observed` (`C × H_obs·decimation`, physical units).
///
/// The observed window fixes one min-max scaler. Each iteration places the
/// latest `H_obs` rows on top of an `H`-row image, completes the rest, and
/// appends the generated rows; the loop runs `ceil(rows / (H − H_obs))` times.
pub fn forecast<T: Real, M: EpsModel<T> + ?Sized>(
    model: &M,
    mask: &CompletionMask,
    sched: &NoiseSchedule<T>,
    observed: &Matrix<T>,
    horizon: usize,
    opts: &ForecastOptions,
) -> Result<ForecastResult<T>> {
    check_request(mask, observed, opts)?;
    let channels = observed.rows();
    if horizon == 0 {
        return Ok(ForecastResult {
            generated: Matrix::zeros(channels, 0),
            horizon,
            iterations: 0,
            metrics: None,
        });
    }
    let gen_rows = mask.generated_rows();
    if gen_rows == 0 {
        return Err(Error::invalid("model has no generated rows (observed_rows = height)"));
    }
    let obs = mask.observed_rows();
    let coarse = decimate(observed, opts.decimation)?;
    let scaler = ChannelScaler::fit(&coarse)?;
    let rows_needed = horizon.div_ceil(opts.decimation);
    let iterations = rows_needed.div_ceil(gen_rows);

    let mut roller = Roller { model, mask, sched, opts: *opts, rng: ChaCha8Rng::seed_from_u64(opts.seed) };
    // Rows are time: `trail` holds every normalized row seen or generated so far.
    let mut trail = scaler.apply(&coarse)?.transpose().into_vec();
    for _ in 0..iterations {
        let start = trail.len() - obs * channels;
        let context = Matrix::from_vec(obs, channels, trail[start..].to_vec())?;
        trail.extend(roller.block(&context)?.into_vec());
    }
    let generated = Matrix::from_vec(obs + iterations * gen_rows, channels, trail)?
        .row_range(obs, rows_needed)?
        .transpose();
    let generated = hold(&scaler.invert(&generated)?, opts.decimation, horizon);
    Ok(ForecastResult { generated, horizon, iterations, metrics: None })
}

/// Like [`forecast`], but every block is conditioned on the true preceding
/// rows from `truth` (`C × horizon`) instead of on earlier generated rows.
pub fn forecast_teacher_forced<T: Real, M: EpsModel<T> + ?Sized>(
    model: &M,
    mask: &CompletionMask,
    sched: &NoiseSchedule<T>,
    observed: &Matrix<T>,
    truth: &Matrix<T>,
    opts: &ForecastOptions,
) -> Result<ForecastResult<T>> {
    check_request(mask, observed, opts)?;
    if truth.rows() != observed.rows() {
        return Err(Error::shape(format!("{} channels", observed.rows()), format!("{}", truth.rows())));
    }
    let horizon = truth.cols();
    let channels = observed.rows();
    if horizon == 0 {
        return Ok(ForecastResult { generated: Matrix::zeros(channels, 0), horizon, iterations: 0, metrics: None });
    }
    let gen_rows = mask.generated_rows();
    if gen_rows == 0 {
        return Err(Error::invalid("model has no generated rows (observed_rows = height)"));
    }
    let obs = mask.observed_rows();
    let d = opts.decimation;
    let coarse = decimate(observed, d)?;
    let scaler = ChannelScaler::fit(&coarse)?;
    let rows_needed = horizon.div_ceil(d);
    let iterations = rows_needed.div_ceil(gen_rows);

    // True rows, padded by holding the last column so every block has full context.
    let mut full = Matrix::from_fn(channels, observed.cols() + rows_needed * d, |c, j| {
        if j < observed.cols() {
            observed[(c, j)]
        } else {
            truth[(c, (j - observed.cols()).min(horizon - 1))]
        }
    });
    full = decimate(&full, d)?;
    let known = scaler
        .apply(&full)?
        .transpose()
        .map(|v| v.max(T::zero()).min(T::one()));

    let mut roller = Roller { model, mask, sched, opts: *opts, rng: ChaCha8Rng::seed_from_u64(opts.seed) };
    let mut out = Vec::with_capacity(iterations * gen_rows * channels);
    for i in 0..iterations {
        let context = known.row_range(i * gen_rows, obs)?;
        out.extend(roller.block(&context)?.into_vec());
    }
    let generated = Matrix::from_vec(iterations * gen_rows, channels, out)?
        .row_range(0, rows_needed)?
        .transpose();
    let generated = hold(&scaler.invert(&generated)?, d, horizon);
    Ok(ForecastResult { generated, horizon, iterations, metrics: None })
}

/// Writes `time_index,channel,value_pred[,value_true]`, one line per (time, channel).
pub fn write_forecast_csv<T: Real, W: Write>(
    out: &mut W,
    labels: &[String],
    pred: &Matrix<T>,
    truth: Option<&Matrix<T>>,
) -> Result<()> {
    if labels.len() != pred.rows() {
        return Err(Error::shape(format!("{} labels", pred.rows()), format!("{}", labels.len())));
    }
    if let Some(t) = truth {
        if t.shape() != pred.shape() {
            return Err(Error::shape(
                format!("{}x{}", pred.rows(), pred.cols()),
                format!("{}x{}", t.rows(), t.cols()),
            ));
        }
    }
    match truth {
        Some(_) => writeln!(out, "time_index,channel,value_pred,value_true")?,
        None => writeln!(out, "time_index,channel,value_pred")?,
    }
    for j in 0..pred.cols() {
        for (c, label) in labels.iter().enumerate() {
            let p = pred[(c, j)].as_f64();
            match truth {
                Some(t) => writeln!(out, "{j},{label},{p},{}", t[(c, j)].as_f64())?,
                None => writeln!(out, "{j},{label},{p}")?,
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub lookback: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Upper bound on training pairs drawn from the series (evenly spaced).
    pub max_pairs: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            lookback: 32,
            hidden: 32,
            epochs: 20,
            batch_size: 32,
            learning_rate: 5e-3,
            max_pairs: 1024,
        }
    }
}

/// One-channel LSTM next-step predictor.
#[derive(Debug, Clone)]
pub struct LstmBaseline<T> {
    cfg: BaselineConfig,
    cell: LstmCell,
    head: (ParamRef, ParamRef),
    params: Vec<T>,
    mean: T,
    scale: T,
}

impl<T: Real> LstmBaseline<T> {
    /// Trains on sliding `lookback → next` pairs of `series`.
    pub fn fit(series: &[T], cfg: &BaselineConfig, seed: u64) -> Result<Self> {
        if cfg.lookback == 0 || cfg.hidden == 0 || cfg.batch_size == 0 {
            return Err(Error::invalid("lookback, hidden and batch_size must be positive"));
        }
        if series.len() <= cfg.lookback {
            return Err(Error::invalid(format!(
                "series of {} samples is too short for lookback {}",
                series.len(),
                cfg.lookback
            )));
        }
        if series.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("baseline series"));
        }
        let n = T::from_usize_lossy(series.len());
        let mean = series.iter().copied().sum::<T>() / n;
        let var = series.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let scale = if var > T::zero() { var.sqrt() } else { T::one() };

        let mut layout = Layout::new();
        let cell = LstmCell::register(&mut layout, "lstm", 1, cfg.hidden);
        let head = (
            layout.add("head.w", &[1, cfg.hidden], Init::Normal((1.0 / cfg.hidden as f64).sqrt())),
            layout.add("head.b", &[1], Init::Zeros),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params: Vec<T> = layout.initialize(&mut rng);
        for i in cell.forget_bias_range() {
            params[i] = T::one();
        }
        let mut model = Self { cfg: *cfg, cell, head, params, mean, scale };

        let z: Vec<T> = series.iter().map(|&v| (v - mean) / scale).collect();
        let total = z.len() - cfg.lookback;
        let take = total.min(cfg.max_pairs.max(1));
        let mut starts: Vec<usize> = (0..take).map(|i| i * total / take).collect();
        let mut opt = Adam::new(model.params.len(), T::lit(cfg.learning_rate));
        let mut grad = vec![T::zero(); model.params.len()];
        for _ in 0..cfg.epochs {
            starts.shuffle(&mut rng);
            for batch in starts.chunks(cfg.batch_size) {
                grad.iter_mut().for_each(|g| *g = T::zero());
                let s = T::one() / T::from_usize_lossy(batch.len());
                for &st in batch {
                    let window = &z[st..st + cfg.lookback];
                    let target = z[st + cfg.lookback];
                    let mut g = Graph::new(&model.params);
                    let out = model.run(&mut g, window);
                    let loss = g.masked_mse(out, vec![target], vec![true]);
                    g.backward(loss, s, &mut grad);
                }
                opt.step(&mut model.params, &grad);
            }
        }
        Ok(model)
    }

    fn run(&self, g: &mut Graph<T>, window: &[T]) -> crate::nn::Var {
        let x = g.input(&[1, window.len()], window.to_vec());
        let h = self.cell.sequence(g, x);
        let (w, b) = (self.head.0.var(g), self.head.1.var(g));
        g.linear(h, w, b)
    }

    pub fn lookback(&self) -> usize {
        self.cfg.lookback
    }

    /// Autoregressive rollout of `horizon` samples after `context`, whose
    /// last `lookback` samples seed the recurrence.
    pub fn rollout(&self, context: &[T], horizon: usize) -> Result<Vec<T>> {
        let lb = self.cfg.lookback;
        if context.len() < lb {
            return Err(Error::invalid(format!("context needs at least {lb} samples")));
        }
        let mut z: Vec<T> = context[context.len() - lb..]
            .iter()
            .map(|&v| (v - self.mean) / self.scale)
            .collect();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut g = Graph::new(&self.params);
            let y = self.run(&mut g, &z[z.len() - lb..]);
            let next = g.value(y)[0];
            z.push(next);
            out.push(next * self.scale + self.mean);
        }
        Ok(out)
    }
}

/// Fits a baseline on `series` and continues it for `horizon` samples.
pub fn lstm_baseline_forecast<T: Real>(series: &[T], horizon: usize, cfg: &BaselineConfig, seed: u64) -> Result<Vec<T>> {
    let model = LstmBaseline::fit(series, cfg, seed)?;
    model.rollout(series, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    /// Returns ε = 0 and counts calls.
    struct Counting(Cell<usize>);

    impl EpsModel<f64> for Counting {
        fn predict_eps(&self, x: &Matrix<f64>, _t: usize, _m: &CompletionMask) -> Result<Matrix<f64>> {
            self.0.set(self.0.get() + 1);
            Ok(Matrix::zeros(x.rows(), x.cols()))
        }
    }

    fn setup() -> (CompletionMask, NoiseSchedule<f64>, Matrix<f64>) {
        let mask = CompletionMask::new(16, 3, 8).unwrap();
        let sched = NoiseSchedule::linear(100, 1e-4, 0.02).unwrap();
        let obs = Matrix::from_fn(3, 8, |c, j| (c * 10 + j) as f64);
        (mask, sched, obs)
    }

    #[test]
    fn zero_horizon_never_calls_model() {
        let (mask, sched, obs) = setup();
        let m = Counting(Cell::new(0));
        let r = forecast(&m, &mask, &sched, &obs, 0, &ForecastOptions::default()).unwrap();
        assert_eq!(r.generated.shape(), (3, 0));
        assert_eq!(m.0.get(), 0);
    }

    #[test]
    fn ceiling_iterations_and_truncation() {
        let (mask, sched, obs) = setup();
        let m = Counting(Cell::new(0));
        let opts = ForecastOptions { num_steps: 5, ..Default::default() };
        let r = forecast(&m, &mask, &sched, &obs, 24, &opts).unwrap();
        assert_eq!(r.iterations, 3);
        assert_eq!(m.0.get(), 15);
        assert_eq!(r.generated.shape(), (3, 24));
        let r = forecast(&m, &mask, &sched, &obs, 17, &opts).unwrap();
        assert_eq!(r.iterations, 3);
        assert_eq!(r.generated.cols(), 17);
    }

    #[test]
    fn decimated_horizon_arithmetic() {
        let (mask, sched, _) = setup();
        let obs = Matrix::from_fn(3, 32, |c, j| (c + j) as f64);
        let opts = ForecastOptions { num_steps: 1, decimation: 4, ..Default::default() };
        let r = forecast(&|x: &Matrix<f64>, _t: usize, _m: &CompletionMask| Ok(Matrix::zeros(x.rows(), x.cols())), &mask, &sched, &obs, 70, &opts).unwrap();
        // 70 samples = 18 rows = 3 blocks of 8.
        assert_eq!(r.iterations, 3);
        assert_eq!(r.generated.cols(), 70);
        for j in 0..70 {
            assert_eq!(r.generated[(1, j)], r.generated[(1, j - j % 4)]);
        }
        let short = Matrix::from_fn(3, 8, |_, _| 0.0);
        assert!(forecast(&|x: &Matrix<f64>, _t: usize, _m: &CompletionMask| Ok(x.clone()), &mask, &sched, &short, 4, &opts).is_err());
    }

    #[test]
    fn no_generated_rows_is_an_error() {
        let mask = CompletionMask::new(8, 3, 8).unwrap();
        let sched = NoiseSchedule::linear(10, 1e-4, 0.02).unwrap();
        let obs = Matrix::from_fn(3, 8, |c, j| (c + j) as f64);
        let m = Counting(Cell::new(0));
        assert!(forecast(&m, &mask, &sched, &obs, 5, &ForecastOptions::default()).is_err());
        assert!(forecast(&m, &mask, &sched, &obs, 0, &ForecastOptions::default()).is_ok());
    }

    #[test]
    fn output_is_within_observed_range_and_input_untouched() {
        let (mask, sched, obs) = setup();
        let before = obs.clone();
        let wild = |x: &Matrix<f64>, t: usize, _m: &CompletionMask| Ok(x.map(|v| v * 3.0 + t as f64 * 1e-3));
        let opts = ForecastOptions { num_steps: 10, eta: 1.0, seed: 3, ..Default::default() };
        let r = forecast(&wild, &mask, &sched, &obs, 20, &opts).unwrap();
        assert_eq!(obs, before);
        for c in 0..3 {
            let (lo, hi) = ((c * 10) as f64, (c * 10 + 7) as f64);
            assert!(r.generated.row(c).iter().all(|&v| v >= lo && v <= hi));
        }
        let again = forecast(&wild, &mask, &sched, &obs, 20, &opts).unwrap();
        assert_eq!(r.generated, again.generated);
    }

    #[test]
    fn teacher_forcing_uses_true_context() {
        let (mask, sched, obs) = setup();
        let truth = Matrix::from_fn(3, 16, |c, j| (c * 10 + 7) as f64 - j as f64 * 0.25);
        let opts = ForecastOptions { num_steps: 3, ..Default::default() };
        let m = Counting(Cell::new(0));
        let r = forecast_teacher_forced(&m, &mask, &sched, &obs, &truth, &opts).unwrap();
        assert_eq!(r.generated.shape(), (3, 16));
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn generated_rows_are_fed_forward_unchanged() {
        let (mask, sched, obs) = setup();
        let seen = std::cell::RefCell::new(Vec::new());
        let recorder = |x: &Matrix<f64>, _t: usize, _m: &CompletionMask| {
            seen.borrow_mut().push(x.clone());
            Ok(x.map(|v| v * 0.3))
        };
        let opts = ForecastOptions { num_steps: 1, ..Default::default() };
        let r = forecast(&recorder, &mask, &sched, &obs, 16, &opts).unwrap();
        let calls = seen.borrow();
        assert_eq!(calls.len(), 2);
        for row in 0..8 {
            for c in 0..3 {
                let pixel = (r.generated[(c, row)] - (c * 10) as f64) / 7.0;
                assert!((calls[1][(row, c)] - (2.0 * pixel - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let pred = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.5]]).unwrap();
        let labels = vec!["Fp1".to_string(), "Cz".to_string()];
        let mut buf = Vec::new();
        write_forecast_csv(&mut buf, &labels, &pred, Some(&pred)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "time_index,channel,value_pred,value_true\n0,Fp1,1,1\n0,Cz,3,3\n1,Fp1,2,2\n1,Cz,4.5,4.5\n"
        );
    }

    #[test]
    fn training_images_are_normalized_windows() {
        let series = Matrix::from_fn(2, 40, |c, j| ((j * (c + 1)) as f64).sin());
        let imgs = training_images(&series, 16, 8).unwrap();
        assert_eq!(imgs.len(), 4);
        for im in &imgs {
            assert_eq!((im.height(), im.width()), (16, 2));
            assert!(im.pixels().as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn baseline_learns_a_constant() {
        let series = vec![7.0f64; 200];
        let cfg = BaselineConfig { epochs: 10, max_pairs: 64, ..Default::default() };
        let out = lstm_baseline_forecast(&series, 20, &cfg, 1).unwrap();
        assert_eq!(out.len(), 20);
        assert!(out.iter().all(|v| (v - 7.0).abs() <= 0.35), "{out:?}");
        assert!(lstm_baseline_forecast(&series, 0, &cfg, 1).unwrap().is_empty());
        assert_eq!(out, lstm_baseline_forecast(&series, 20, &cfg, 1).unwrap());
        assert!(lstm_baseline_forecast(&series[..32], 5, &cfg, 1).is_err());
    }
}
