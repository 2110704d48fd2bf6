//! Subcommand implementations.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use eegdif_core::classifier::{early_warning, train_classifier, ClassifierConfig, WarningInput};
use eegdif_core::diffusion::ScheduleSpec;
use eegdif_core::edf::{
    format_annotations, intervals_to_samples, parse_annotations, parse_edf, select_channels, window_signals,
    RecordingSession, DEFAULT_CHANNELS,
};
use eegdif_core::forecast::{
    channel_metrics, decimate, forecast, forecast_teacher_forced, training_images, write_forecast_csv,
    BaselineConfig, ForecastOptions, LstmBaseline,
};
use eegdif_core::metrics::{classification_report, delong_test, paired_t_test, roc_auc};
use eegdif_core::synth::{gen_coupled, gen_events, write_edf, BurstConfig};
use eegdif_core::{Classifier32, Denoiser32, DenoiserConfig, Matrix, TrainConfig, WindowedSample};

use crate::dataset::{self, Provenance, Split};
use crate::settings::Settings;
use crate::tables::{read_forecast, read_scores};
use crate::{
    Cli, Command, EvalArgs, ForecastArgs, PlotArgs, PrepareArgs, SamplerArgs, SignalSource, SynthArgs,
    TrainClassifierArgs, TrainDiffusionArgs, WarnArgs,
};

struct Ctx {
    seed: u64,
    cfg: Settings,
}

/// Announces an output file on standard output.
fn emit(path: &Path) {
    println!("wrote {}", path.display());
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes)?;
    w.flush()?;
    emit(path);
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = Settings::load(cli.config.as_deref())?;
    let seed = cfg.get(cli.seed, "seed", 0)?;
    let ctx = Ctx { seed, cfg };
    match cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Prepare(a) => prepare(&ctx, a),
        Command::TrainDiffusion(a) => train_diffusion(&ctx, a),
        Command::TrainClassifier(a) => train_clf(&ctx, a),
        Command::Forecast(a) => run_forecast(&ctx, a),
        Command::Warn(a) => warn(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Plot(a) => plot(&ctx, a),
    }
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let c = &ctx.cfg;
    let channels = c.get(a.channels, "channels", 16)?;
    let rate = c.get(a.rate, "rate", 128.0)?;
    let duration = c.get(a.duration_seconds, "duration-seconds", 480.0)?;
    let lag = c.get(a.lag, "lag", 4)?;
    let noise = c.get(a.noise_sd, "noise-sd", 2.0)?;
    let burst = BurstConfig {
        rate,
        events_per_min: c.get(a.bursts_per_min, "bursts-per-min", 3.0)?,
        gain: c.get(a.burst_gain, "burst-gain", 2.0)?,
        duration: c.get(a.burst_seconds, "burst-seconds", 5.0)?,
        spike_amplitude: c.get(a.spike_amplitude, "spike-amplitude", 120.0)?,
        spike_freq: c.get(a.spike_freq, "spike-freq", 20.0)?,
    };
    let patient = c.get(a.patient_id, "patient-id", "synth".to_string())?;
    let samples = (duration * rate).round() as usize;
    ensure!(samples > 0, "duration and rate give an empty recording");

    let base = gen_coupled(channels, samples, rate, lag, noise, ctx.seed)?;
    let (signals, intervals) = gen_events(&base, &burst, ctx.seed.wrapping_add(1))?;
    let labels: Vec<String> = if channels <= DEFAULT_CHANNELS.len() {
        DEFAULT_CHANNELS[..channels].iter().map(|s| s.to_string()).collect()
    } else {
        (0..channels).map(|i| format!("Ch{i}")).collect()
    };
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let session = RecordingSession::from_matrix(&patient, &refs, rate, &signals)?;

    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let edf = a.out_dir.join("synth.edf");
    write_edf(&session, &edf)?;
    emit(&edf);
    let seconds: Vec<(f64, f64)> = intervals.iter().map(|&(s, e)| (s as f64 / rate, e as f64 / rate)).collect();
    write_file(&a.out_dir.join("synth.annotations.txt"), format_annotations(&seconds).as_bytes())?;
    Ok(())
}

struct Signals {
    labels: Vec<String>,
    data: Matrix<f64>,
    rate: f64,
    intervals: Vec<(usize, usize)>,
    patient: String,
}

fn load_signals(ctx: &Ctx, src: &SignalSource) -> Result<Signals> {
    let bytes = fs::read(&src.edf).with_context(|| format!("reading {}", src.edf.display()))?;
    let session = parse_edf(&bytes).with_context(|| format!("parsing {}", src.edf.display()))?;
    let wanted = ctx.cfg.opt(src.channels.clone(), "channels")?;
    let labels: Vec<String> = match wanted.as_deref() {
        None => DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect(),
        Some("all") => session.channels.iter().map(|c| c.label.trim().to_string()).collect(),
        Some(list) => list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
    };
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let (data, rate) = select_channels(&session, &refs)?;
    let intervals = match &src.annotations {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            intervals_to_samples(&parse_annotations(&text)?, rate)
        }
        None => Vec::new(),
    };
    Ok(Signals { labels, data, rate, intervals, patient: session.patient_id })
}

fn seconds_to_samples(s: f64, rate: f64, what: &str) -> Result<usize> {
    ensure!(s.is_finite() && s >= 0.0, "{what} must be a non-negative number of seconds");
    Ok((s * rate).round() as usize)
}

fn prepare(ctx: &Ctx, a: PrepareArgs) -> Result<()> {
    let c = &ctx.cfg;
    let sig = load_signals(ctx, &a.source)?;
    let window_s = c.get(a.window_seconds, "window-seconds", 30.0)?;
    let window = seconds_to_samples(window_s, sig.rate, "window-seconds")?;
    let stride = seconds_to_samples(c.get(a.stride_seconds, "stride-seconds", window_s)?, sig.rate, "stride-seconds")?;
    let test_fraction = c.get(a.test_fraction, "test-fraction", 0.3)?;
    ensure!((0.0..=1.0).contains(&test_fraction), "test-fraction must lie in [0, 1]");
    let windows = window_signals(&sig.data, window, stride, &sig.intervals, sig.rate, &sig.patient)?;
    ensure!(!windows.is_empty(), "recording is shorter than one window");
    let n_test = (windows.len() as f64 * test_fraction).round() as usize;
    let cut = windows.len() - n_test;
    let tagged: Vec<(WindowedSample, Split)> = windows
        .into_iter()
        .enumerate()
        .map(|(i, w)| (w, if i < cut { Split::Train } else { Split::Test }))
        .collect();
    let positives = tagged.iter().filter(|(w, _)| w.label == 1).count();
    let source = Provenance {
        edf: a.source.edf.display().to_string(),
        annotations: a.source.annotations.as_ref().map(|p| p.display().to_string()),
    };
    let files = dataset::write(&a.out_dir, sig.labels, sig.rate, stride, source, &tagged)?;
    println!(
        "{} windows of {window} samples ({positives} labeled seizure, {n_test} in the test split)",
        tagged.len()
    );
    if let Some(m) = files.last() {
        emit(m);
    }
    println!("({} window blobs under {})", files.len() - 1, a.out_dir.join("windows").display());
    Ok(())
}

/// Evenly spaced subset of at most `max` items, order preserved.
fn spread<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    (0..max).map(|i| items[i * items.len() / max].clone()).collect()
}

fn write_curve(path: &Path, curve: &[f32]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "epoch,loss")?;
    for (i, l) in curve.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, l)?;
    }
    w.flush()?;
    emit(path);
    Ok(())
}

fn loss_path(out: &Path) -> PathBuf {
    out.with_extension("loss.csv")
}

fn train_diffusion(ctx: &Ctx, a: TrainDiffusionArgs) -> Result<()> {
    let c = &ctx.cfg;
    let split = if c.switch(a.all_windows, "all-windows")? { None } else { Some(Split::Train) };
    let (manifest, windows) = dataset::load(&a.dataset, split)?;
    ensure!(!windows.is_empty(), "dataset has no windows in the selected split");
    let height = c.get(a.image_height, "image-height", 16)?;
    let config = DenoiserConfig {
        height,
        width: manifest.channels.len(),
        observed_rows: c.get(a.observed_rows, "observed-rows", height / 2)?,
        base_width: c.get(a.base_width, "base-width", 16)?,
        depth: c.get(a.depth, "depth", 2)?,
        time_embed_dim: c.get(a.time_embed_dim, "time-embed-dim", 32)?,
        seed: ctx.seed,
        decimation: c.get(a.decimation, "decimation", 1)?,
    };
    let train = TrainConfig {
        epochs: c.get(a.epochs, "epochs", 100)?,
        batch_size: c.get(a.batch_size, "batch-size", 16)?,
        learning_rate: c.get(a.learning_rate, "learning-rate", 1e-3)?,
        seed: ctx.seed,
    };
    let spec = ScheduleSpec {
        steps: c.get(a.train_steps, "train-steps", ScheduleSpec::default().steps)?,
        beta_min: c.get(a.beta_min, "beta-min", ScheduleSpec::default().beta_min)?,
        beta_max: c.get(a.beta_max, "beta-max", ScheduleSpec::default().beta_max)?,
    };
    let stride = c.get(a.image_stride, "image-stride", (height / 2).max(1))?;
    let max_images = c.get(a.max_images, "max-images", 256)?;

    let mut model = Denoiser32::init(config)?;
    let mut images = Vec::new();
    for w in &windows {
        let coarse = decimate(&w.data.cast::<f32>(), config.decimation)?;
        images.extend(training_images(&coarse, height, stride)?);
    }
    ensure!(
        !images.is_empty(),
        "windows of {} samples are shorter than one image ({} rows x decimation {})",
        manifest.window,
        height,
        config.decimation
    );
    let images = spread(&images, max_images.max(1));
    log::info!("training denoiser ({} parameters) on {} images", model.param_count(), images.len());
    let sched = spec.build::<f32>()?;
    let mask = model.mask();
    let curve = model.train(&images, &mask, &sched, &train)?;
    if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
        println!("denoiser: {} images, {} epochs, loss {first:.4} -> {last:.4}", images.len(), curve.len());
    }
    write_file(&a.out, &model.to_checkpoint(&spec)?)?;
    write_curve(&loss_path(&a.out), &curve)
}

fn train_clf(ctx: &Ctx, a: TrainClassifierArgs) -> Result<()> {
    let c = &ctx.cfg;
    let split = if c.switch(a.all_windows, "all-windows")? { None } else { Some(Split::Train) };
    let (manifest, windows) = dataset::load(&a.dataset, split)?;
    let max = c.get(a.max_windows, "max-windows", 400)?.max(2);
    let pos: Vec<WindowedSample> = windows.iter().filter(|w| w.label == 1).cloned().collect();
    let neg: Vec<WindowedSample> = windows.iter().filter(|w| w.label == 0).cloned().collect();
    let mut chosen = spread(&pos, max / 2);
    let room = max - chosen.len();
    chosen.extend(spread(&neg, room));
    let defaults = ClassifierConfig::default();
    let config = ClassifierConfig {
        channels: manifest.channels.len(),
        hidden: c.get(a.hidden, "hidden", defaults.hidden)?,
        pool: c.get(a.pool, "pool", defaults.pool)?,
        epochs: c.get(a.epochs, "epochs", defaults.epochs)?,
        batch_size: c.get(a.batch_size, "batch-size", defaults.batch_size)?,
        learning_rate: c.get(a.learning_rate, "learning-rate", defaults.learning_rate)?,
        threshold: c.get(a.threshold, "threshold", defaults.threshold)?,
        seed: ctx.seed,
        ..defaults
    };
    let (model, curve) = train_classifier::<f32>(&chosen, &config)?;
    println!(
        "classifier: {} windows ({} seizure), {} epochs",
        chosen.len(),
        chosen.iter().filter(|w| w.label == 1).count(),
        curve.len()
    );
    write_file(&a.out, &model.to_checkpoint()?)?;
    write_curve(&loss_path(&a.out), &curve)
}

fn load_denoiser(path: &Path) -> Result<(Denoiser32, ScheduleSpec)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Denoiser32::from_checkpoint(&bytes).with_context(|| format!("loading denoiser checkpoint {}", path.display()))
}

fn load_classifier(path: &Path) -> Result<Classifier32> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Classifier32::from_checkpoint(&bytes).with_context(|| format!("loading classifier checkpoint {}", path.display()))
}

fn sampler_options(ctx: &Ctx, s: &SamplerArgs, decimation: usize, seed: u64) -> Result<ForecastOptions> {
    let d = ForecastOptions::default();
    Ok(ForecastOptions {
        num_steps: ctx.cfg.get(s.num_steps, "num-steps", d.num_steps)?,
        eta: ctx.cfg.get(s.eta, "eta", d.eta)?,
        seed,
        decimation,
    })
}

fn print_metrics(pred: &Matrix<f32>, truth: &Matrix<f32>) -> Result<()> {
    let m = channel_metrics(pred, truth)?;
    println!(
        "channel-averaged MAE {:.4}, MSE {:.4}, RMSE {:.4}",
        m.mean_mae, m.mean_mse, m.mean_rmse
    );
    Ok(())
}

fn run_forecast(ctx: &Ctx, a: ForecastArgs) -> Result<()> {
    let c = &ctx.cfg;
    let sig = load_signals(ctx, &a.source)?;
    let n = sig.data.cols();
    let method = c.get(a.method.clone(), "method", "diffusion".to_string())?;
    let model = match method.as_str() {
        "diffusion" => {
            let path = c.opt(a.model.clone(), "model")?.ok_or_else(|| anyhow!("--model is required for diffusion forecasts"))?;
            Some(load_denoiser(&path)?)
        }
        "lstm" => None,
        other => bail!("unknown method `{other}` (expected `diffusion` or `lstm`)"),
    };
    let obs_len = model.as_ref().map(|(m, _)| m.config().observed_rows * m.config().decimation);
    let origin = match c.opt(a.start_seconds, "start-seconds")? {
        Some(s) => seconds_to_samples(s, sig.rate, "start-seconds")?,
        None => obs_len.ok_or_else(|| anyhow!("--start-seconds is required for the lstm baseline"))?,
    };
    ensure!(origin <= n, "start lies past the end of the recording ({n} samples)");
    let horizon = match (a.horizon, c.opt(a.horizon_seconds, "horizon-seconds")?) {
        (Some(h), _) => h,
        (None, Some(s)) => {
            let rate = c.get(a.rate, "rate", sig.rate)?;
            ensure!(rate > 0.0, "rate must be positive");
            seconds_to_samples(s, rate, "horizon-seconds")?
        }
        (None, None) => match &model {
            Some((m, _)) => m.config().mask().generated_rows() * m.config().decimation,
            None => bail!("give --horizon or --horizon-seconds"),
        },
    };
    let data = sig.data.cast::<f32>();
    let truth = (origin + horizon <= n).then(|| data.columns(origin, horizon)).transpose()?;

    let pred = match &model {
        Some((m, spec)) => {
            let obs_len = obs_len.expect("model present");
            ensure!(
                origin >= obs_len,
                "forecast origin at sample {origin} leaves fewer than the {obs_len} observed samples the model needs"
            );
            let observed = data.columns(origin - obs_len, obs_len)?;
            let sched = spec.build::<f32>()?;
            let opts = sampler_options(ctx, &a.sampler, m.config().decimation, ctx.seed)?;
            let mask = m.mask();
            if c.switch(a.teacher_forced, "teacher-forced")? {
                let t = truth.as_ref().ok_or_else(|| anyhow!("--teacher-forced needs the true future inside the recording"))?;
                forecast_teacher_forced(m, &mask, &sched, &observed, t, &opts)?.generated
            } else {
                forecast(m, &mask, &sched, &observed, horizon, &opts)?.generated
            }
        }
        None => {
            let cfg = BaselineConfig {
                epochs: c.get(a.baseline_epochs, "baseline-epochs", BaselineConfig::default().epochs)?,
                ..Default::default()
            };
            let mut out = Matrix::zeros(data.rows(), horizon);
            for ch in 0..data.rows() {
                let history = &data.row(ch)[..origin];
                let model = LstmBaseline::fit(history, &cfg, ctx.seed.wrapping_add(ch as u64))
                    .with_context(|| format!("baseline for channel {}", sig.labels[ch]))?;
                out.row_mut(ch).copy_from_slice(&model.rollout(history, horizon)?);
            }
            out
        }
    };
    let mut w = create(&a.out)?;
    write_forecast_csv(&mut w, &sig.labels, &pred, truth.as_ref())?;
    w.flush()?;
    emit(&a.out);
    println!("{horizon} samples per channel x {} channels", sig.labels.len());
    if let Some(t) = &truth {
        print_metrics(&pred, t)?;
    }
    Ok(())
}

fn warn(ctx: &Ctx, a: WarnArgs) -> Result<()> {
    let c = &ctx.cfg;
    let sig = load_signals(ctx, &a.source)?;
    let (den, spec) = load_denoiser(&a.model)?;
    let clf = load_classifier(&a.classifier)?;
    let horizon = c.get(a.horizon, "horizon", clf.config().window)?;
    ensure!(horizon > 0, "give --horizon (the classifier checkpoint does not record a window length)");
    let stride = c.get(a.stride, "stride", horizon)?.max(1);
    let threshold = c.get(a.threshold, "threshold", clf.config().threshold)?;
    let input = if c.switch(a.include_observed, "include-observed")? {
        WarningInput::ObservedAndGenerated
    } else {
        WarningInput::Generated
    };
    let max_windows = c.get(a.max_windows, "max-windows", usize::MAX)?;
    let obs_len = den.config().observed_rows * den.config().decimation;
    let n = sig.data.cols();
    let first = match c.opt(a.start_seconds, "start-seconds")? {
        Some(s) => seconds_to_samples(s, sig.rate, "start-seconds")?,
        None => 0,
    }
    .max(obs_len);
    let last = match c.opt(a.end_seconds, "end-seconds")? {
        Some(s) => seconds_to_samples(s, sig.rate, "end-seconds")?.min(n),
        None => n,
    };
    let sched = spec.build::<f32>()?;
    let mask = den.mask();
    let data = sig.data.cast::<f32>();

    let mut w = create(&a.out)?;
    writeln!(w, "start_time,probability,predicted,label")?;
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    let mut origin = first;
    while origin + horizon <= last && scores.len() < max_windows {
        let observed = data.columns(origin - obs_len, obs_len)?;
        let opts = sampler_options(ctx, &a.sampler, den.config().decimation, ctx.seed.wrapping_add(origin as u64))?;
        let p = early_warning(&den, &mask, &sched, &clf, &observed, horizon, threshold, &opts, input)?;
        let end = origin + horizon;
        let label = u8::from(sig.intervals.iter().any(|&(s, e)| s < end && origin < e));
        writeln!(w, "{},{},{},{}", origin as f64 / sig.rate, p.probability, p.label, label)?;
        scores.push(p.probability);
        labels.push(label);
        origin += stride;
    }
    w.flush()?;
    ensure!(!scores.is_empty(), "recording too short for one warning window");
    emit(&a.out);
    let flagged = scores.iter().filter(|&&s| s >= threshold).count();
    println!("{} windows, {flagged} flagged at threshold {threshold}", scores.len());
    if labels.contains(&0) && labels.contains(&1) {
        println!("AUC {:.4}", roc_auc(&scores, &labels)?.auc);
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    ensure!(a.forecast.is_some() || a.scores.is_some(), "give --forecast and/or --scores");
    let mut rows: Vec<(String, String, String)> = Vec::new();
    let mut push = |m: &str, ch: &str, v: String| rows.push((m.to_string(), ch.to_string(), v));

    if let Some(path) = &a.forecast {
        let table = read_forecast(path)?;
        let truth = match &a.truth {
            Some(t) => {
                let tt = read_forecast(t)?;
                ensure!(tt.channels == table.channels, "{}: channels differ from {}", t.display(), path.display());
                tt.pred
            }
            None => table
                .truth
                .clone()
                .ok_or_else(|| anyhow!("{} has no value_true column; give --truth", path.display()))?,
        };
        let m = channel_metrics(&table.pred, &truth)?;
        for (name, r) in table.channels.iter().zip(&m.per_channel) {
            push("mae", name, r.mae.to_string());
            push("mse", name, r.mse.to_string());
            push("rmse", name, r.rmse.to_string());
            push("r2", name, fmt_opt(r.r2));
        }
        let defined: Vec<f64> = m.per_channel.iter().filter_map(|r| r.r2).collect();
        let mean_r2 = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        push("mae", "average", m.mean_mae.to_string());
        push("mse", "average", m.mean_mse.to_string());
        push("rmse", "average", m.mean_rmse.to_string());
        push("r2", "average", fmt_opt(mean_r2));
        println!(
            "forecast: {} channels x {} samples; average MAE {:.4}, MSE {:.4}, RMSE {:.4}, R2 {}",
            table.channels.len(),
            table.pred.cols(),
            m.mean_mae,
            m.mean_mse,
            m.mean_rmse,
            fmt_opt(mean_r2)
        );

        if let Some(bpath) = &a.baseline {
            let base = read_forecast(bpath)?;
            ensure!(base.channels == table.channels, "{}: channels differ from {}", bpath.display(), path.display());
            let bm = channel_metrics(&base.pred, &truth)?;
            for (name, r) in base.channels.iter().zip(&bm.per_channel) {
                push("baseline_mae", name, r.mae.to_string());
            }
            push("baseline_mae", "average", bm.mean_mae.to_string());
            let ours: Vec<f64> = m.per_channel.iter().map(|r| r.mae).collect();
            let theirs: Vec<f64> = bm.per_channel.iter().map(|r| r.mae).collect();
            let t = paired_t_test(&ours, &theirs)?;
            push("t_test_t", "all", t.t.to_string());
            push("t_test_df", "all", t.df.to_string());
            push("t_test_p", "all", t.p.to_string());
            println!(
                "baseline: average MAE {:.4}; paired t-test over channels t = {:.4}, p = {:.4}",
                bm.mean_mae, t.t, t.p
            );
        }
    }

    if let Some(path) = &a.scores {
        let (scores, labels) = read_scores(path)?;
        let threshold = ctx.cfg.get(a.threshold, "threshold", 0.5)?;
        let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
        let r = classification_report(&predicted, &labels)?;
        for (k, v) in [("accuracy", r.accuracy), ("precision", r.precision), ("recall", r.recall), ("f1", r.f1)] {
            push(k, "all", v.to_string());
        }
        let auc = if labels.contains(&0) && labels.contains(&1) {
            let auc = roc_auc(&scores, &labels)?.auc;
            push("auc", "all", auc.to_string());
            Some(auc)
        } else {
            push("auc", "all", "undefined".into());
            None
        };
        println!(
            "warnings: {} windows; AUC {}, accuracy {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}",
            scores.len(),
            fmt_opt(auc),
            r.accuracy,
            r.precision,
            r.recall,
            r.f1
        );
        if let Some(cpath) = &a.compare_scores {
            let (other, other_labels) = read_scores(cpath)?;
            ensure!(other_labels == labels, "{}: labels differ from {}", cpath.display(), path.display());
            let d = delong_test(&scores, &other, &labels)?;
            push("delong_auc_other", "all", d.auc_b.to_string());
            push("delong_z", "all", d.z.to_string());
            push("delong_p", "all", d.p.to_string());
            println!("DeLong: AUC {:.4} vs {:.4}, z = {:.4}, p = {:.4}", d.auc_a, d.auc_b, d.z, d.p);
        }
    }

    let mut w = create(&a.out)?;
    writeln!(w, "metric,channel,value")?;
    for (m, ch, v) in &rows {
        writeln!(w, "{m},{ch},{v}")?;
    }
    w.flush()?;
    emit(&a.out);
    Ok(())
}

fn plot(ctx: &Ctx, a: PlotArgs) -> Result<()> {
    let table = read_forecast(&a.forecast)?;
    let wanted: Vec<String> = match ctx.cfg.opt(a.channels.clone(), "plot-channels")? {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => table.channels.iter().take(4).cloned().collect(),
    };
    let mut idx = Vec::with_capacity(wanted.len());
    for name in &wanted {
        let i = table
            .channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| anyhow!("channel `{name}` not in {}", a.forecast.display()))?;
        idx.push(i);
    }
    let pick = |m: &Matrix<f64>| Matrix::from_fn(idx.len(), m.cols(), |r, j| m[(idx[r], j)]);
    let pred = pick(&table.pred);
    let truth = table.truth.as_ref().map(pick);
    let max_points = ctx.cfg.get(a.max_points, "max-points", 2000)?;
    let svg = crate::plot::render(&wanted, &pred, truth.as_ref(), ctx.cfg.opt(a.rate, "rate")?, max_points);
    write_file(&a.out, svg.as_bytes())
}
