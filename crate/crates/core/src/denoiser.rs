//! U-Net noise predictor and its training loop.
//!
//! Architecture for `depth = d`, `base_width = w` (widths `c_l = w·2^l`):
//!
//! ```text
//! [x_t, mask] ─ conv3 ─ enc_0 ─ pool ─ enc_1 ─ … ─ pool ─ mid
//!                 │skip_0        │skip_1                   │
//!     out ← conv3 ← dec_0 ← up ← dec_1 ← … ← up ───────────┘
//! ```
//!
//! Each block is conv3 → GroupNorm → SiLU → (+ time embedding) → conv3 →
//! GroupNorm → SiLU plus a residual path (1×1 conv when widths differ).
//! Inputs whose sides are not multiples of `2^d` are zero-padded internally.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checkpoint;
use crate::diffusion::{sample_training_pair, to_diffusion_space, CompletionMask, EpsModel, NoiseSchedule, ScheduleSpec};
use crate::error::{Error, Result};
use crate::imaging::SignalImage;
use crate::matrix::Matrix;
use crate::nn::{Adam, Graph, Init, Layout, ParamRef, Var};
use crate::scalar::Real;

const CHECKPOINT_KIND: &str = "denoiser";
pub const SCALER_POLICY: &str = "per-channel min-max of the observed rows, recomputed per forecast";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    /// Image rows (time points per image).
    pub height: usize,
    /// Image columns (channels).
    pub width: usize,
    /// Rows given as clean context; the rest are generated.
    pub observed_rows: usize,
    pub base_width: usize,
    pub depth: usize,
    pub time_embed_dim: usize,
    pub seed: u64,
    /// Raw samples averaged into one image row.
    #[serde(default = "one")]
    pub decimation: usize,
}

fn one() -> usize {
    1
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            height: 16,
            width: 16,
            observed_rows: 8,
            base_width: 16,
            depth: 2,
            time_embed_dim: 32,
            seed: 0,
            decimation: 1,
        }
    }
}

impl DenoiserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if self.observed_rows > self.height {
            return Err(Error::invalid("observed_rows exceeds image height"));
        }
        if self.base_width == 0 || self.depth == 0 {
            return Err(Error::invalid("base_width and depth must be at least 1"));
        }
        if self.depth > 6 {
            return Err(Error::invalid(format!("depth {} is too large (max 6)", self.depth)));
        }
        if self.decimation == 0 {
            return Err(Error::invalid("decimation must be at least 1"));
        }
        if self.time_embed_dim < 2 || !self.time_embed_dim.is_multiple_of(2) {
            return Err(Error::invalid("time_embed_dim must be even and at least 2"));
        }
        Ok(())
    }

    pub fn mask(&self) -> CompletionMask {
        CompletionMask::new(self.height, self.width, self.observed_rows).expect("validated config")
    }

    fn padded(&self) -> (usize, usize) {
        let unit = 1usize << self.depth;
        (self.height.div_ceil(unit) * unit, self.width.div_ceil(unit) * unit)
    }

    fn widths(&self) -> Vec<usize> {
        (0..=self.depth).map(|l| self.base_width << l).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Largest group count ≤ 8 dividing `channels`.
fn group_count(channels: usize) -> usize {
    (1..=8.min(channels)).rev().find(|g| channels.is_multiple_of(*g)).unwrap_or(1)
}

#[derive(Debug, Clone)]
struct Block {
    conv1: (ParamRef, ParamRef),
    norm1: (ParamRef, ParamRef),
    temb: (ParamRef, ParamRef),
    conv2: (ParamRef, ParamRef),
    norm2: (ParamRef, ParamRef),
    skip: Option<(ParamRef, ParamRef)>,
    groups: usize,
}

impl Block {
    fn register(layout: &mut Layout, name: &str, cin: usize, cout: usize, temb_dim: usize) -> Self {
        let conv = |l: &mut Layout, tag: &str, ci: usize, k: usize| {
            (
                l.weight(format!("{name}.{tag}.w"), &[cout, ci, k, k], ci * k * k),
                l.add(format!("{name}.{tag}.b"), &[cout], Init::Zeros),
            )
        };
        let norm = |l: &mut Layout, tag: &str| {
            (
                l.add(format!("{name}.{tag}.gamma"), &[cout], Init::Constant(1.0)),
                l.add(format!("{name}.{tag}.beta"), &[cout], Init::Zeros),
            )
        };
        let conv1 = conv(layout, "conv1", cin, 3);
        let norm1 = norm(layout, "norm1");
        let temb = (
            layout.weight(format!("{name}.temb.w"), &[cout, temb_dim], temb_dim),
            layout.add(format!("{name}.temb.b"), &[cout], Init::Zeros),
        );
        let conv2 = conv(layout, "conv2", cout, 3);
        let norm2 = norm(layout, "norm2");
        let skip = (cin != cout).then(|| conv(layout, "skip", cin, 1));
        Self {
            conv1,
            norm1,
            temb,
            conv2,
            norm2,
            skip,
            groups: group_count(cout),
        }
    }

    fn forward<T: Real>(&self, g: &mut Graph<T>, x: Var, temb: Var) -> Var {
        let (w, b) = (self.conv1.0.var(g), self.conv1.1.var(g));
        let h = g.conv2d(x, w, b);
        let (ga, be) = (self.norm1.0.var(g), self.norm1.1.var(g));
        let h = g.group_norm(h, ga, be, self.groups);
        let h = g.silu(h);
        let (tw, tb) = (self.temb.0.var(g), self.temb.1.var(g));
        let shift = g.linear(temb, tw, tb);
        let h = g.add_channel(h, shift);
        let (w, b) = (self.conv2.0.var(g), self.conv2.1.var(g));
        let h = g.conv2d(h, w, b);
        let (ga, be) = (self.norm2.0.var(g), self.norm2.1.var(g));
        let h = g.group_norm(h, ga, be, self.groups);
        let h = g.silu(h);
        let residual = match &self.skip {
            Some((w, b)) => {
                let (w, b) = (w.var(g), b.var(g));
                g.conv2d(x, w, b)
            }
            None => x,
        };
        g.add(h, residual)
    }
}

#[derive(Debug, Clone)]
struct Arch {
    layout: Layout,
    temb1: (ParamRef, ParamRef),
    temb2: (ParamRef, ParamRef),
    input: (ParamRef, ParamRef),
    encoders: Vec<Block>,
    mid: Block,
    decoders: Vec<Block>,
    output: (ParamRef, ParamRef),
}

impl Arch {
    fn new(cfg: &DenoiserConfig) -> Self {
        let e = cfg.time_embed_dim;
        let c = cfg.widths();
        let mut l = Layout::new();
        let temb1 = (l.weight("temb.fc1.w", &[e, e], e), l.add("temb.fc1.b", &[e], Init::Zeros));
        let temb2 = (l.weight("temb.fc2.w", &[e, e], e), l.add("temb.fc2.b", &[e], Init::Zeros));
        let input = (l.weight("in.w", &[c[0], 2, 3, 3], 18), l.add("in.b", &[c[0]], Init::Zeros));
        let encoders = (0..cfg.depth)
            .map(|lv| {
                let cin = if lv == 0 { c[0] } else { c[lv - 1] };
                Block::register(&mut l, &format!("enc{lv}"), cin, c[lv], e)
            })
            .collect();
        let mid = Block::register(&mut l, "mid", c[cfg.depth - 1], c[cfg.depth], e);
        // Decoders are registered deepest first, matching evaluation order.
        let decoders = (0..cfg.depth)
            .rev()
            .map(|lv| Block::register(&mut l, &format!("dec{lv}"), c[lv + 1] + c[lv], c[lv], e))
            .collect();
        let output = (
            l.add("out.w", &[1, c[0], 3, 3], Init::Normal(0.1 / ((9 * c[0]) as f64).sqrt())),
            l.add("out.b", &[1], Init::Zeros),
        );
        Self {
            layout: l,
            temb1,
            temb2,
            input,
            encoders,
            mid,
            decoders,
            output,
        }
    }
}

/// Sinusoidal embedding of an integer timestep.
fn timestep_embedding<T: Real>(t: usize, dim: usize) -> Vec<T> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    let freqs: Vec<f64> = (0..half)
        .map(|i| (-(10_000f64.ln()) * i as f64 / half as f64).exp())
        .collect();
    out.extend(freqs.iter().map(|f| T::lit((t as f64 * f).sin())));
    out.extend(freqs.iter().map(|f| T::lit((t as f64 * f).cos())));
    out
}

/// Trainable `ε_θ(x_t, t)`.
#[derive(Debug, Clone)]
pub struct Denoiser<T> {
    config: DenoiserConfig,
    arch: Arch,
    params: Vec<T>,
}

impl<T: Real> Denoiser<T> {
    /// Fresh network with He-normal weights drawn from `config.seed`.
    pub fn init(config: DenoiserConfig) -> Result<Self> {
        config.validate()?;
        let arch = Arch::new(&config);
        let params = arch.layout.initialize(&mut ChaCha8Rng::seed_from_u64(config.seed));
        Ok(Self { config, arch, params })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn mask(&self) -> CompletionMask {
        self.config.mask()
    }

    /// Parameter names with their offsets and shapes, in serialization order.
    pub fn param_names(&self) -> impl Iterator<Item = (&str, &ParamRef)> {
        self.arch.layout.names()
    }

    fn check_input(&self, x_t: &Matrix<T>, mask: &CompletionMask) -> Result<()> {
        let want = (self.config.height, self.config.width);
        if x_t.shape() != want || (mask.height(), mask.width()) != want {
            return Err(Error::shape(
                format!("{}x{}", want.0, want.1),
                format!("{}x{}", x_t.rows(), x_t.cols()),
            ));
        }
        if !x_t.is_finite() {
            return Err(Error::NonFinite("denoiser input"));
        }
        Ok(())
    }

    fn pad(&self, m: &[T], fill: T) -> Vec<T> {
        let (h, w) = (self.config.height, self.config.width);
        let (ph, pw) = self.config.padded();
        let mut out = vec![fill; ph * pw];
        for r in 0..h {
            out[r * pw..r * pw + w].copy_from_slice(&m[r * w..(r + 1) * w]);
        }
        out
    }

    fn crop(&self, v: &[T]) -> Matrix<T> {
        let (h, w) = (self.config.height, self.config.width);
        let pw = self.config.padded().1;
        Matrix::from_fn(h, w, |r, c| v[r * pw + c])
    }

    /// Records the network on `g`; the result has shape `[1, H_pad, W_pad]`.
    fn forward(&self, g: &mut Graph<T>, x_t: &Matrix<T>, t: usize, mask: &CompletionMask) -> Var {
        let (ph, pw) = self.config.padded();
        let a = &self.arch;

        let emb = g.input(&[self.config.time_embed_dim], timestep_embedding(t, self.config.time_embed_dim));
        let (w, b) = (a.temb1.0.var(g), a.temb1.1.var(g));
        let emb = g.linear(emb, w, b);
        let emb = g.silu(emb);
        let (w, b) = (a.temb2.0.var(g), a.temb2.1.var(g));
        let emb = g.linear(emb, w, b);
        let emb = g.silu(emb);

        let flags: Vec<T> = mask.flags().into_iter().map(|f| if f { T::one() } else { T::zero() }).collect();
        let mut input = self.pad(x_t.as_slice(), T::zero());
        input.extend(self.pad(&flags, T::zero()));
        let x = g.input(&[2, ph, pw], input);
        let (w, b) = (a.input.0.var(g), a.input.1.var(g));
        let mut h = g.conv2d(x, w, b);

        let mut skips = Vec::with_capacity(a.encoders.len());
        for (lv, block) in a.encoders.iter().enumerate() {
            if lv > 0 {
                h = g.avg_pool2d(h);
            }
            h = block.forward(g, h, emb);
            skips.push(h);
        }
        h = g.avg_pool2d(h);
        h = a.mid.forward(g, h, emb);
        for block in &a.decoders {
            let skip = skips.pop().expect("one skip per level");
            let up = g.upsample2d(h);
            let cat = g.concat(up, skip);
            h = block.forward(g, cat, emb);
        }
        let h = g.silu(h);
        let (w, b) = (a.output.0.var(g), a.output.1.var(g));
        g.conv2d(h, w, b)
    }

    /// `ε_θ(x_t, t)` using the configured completion mask.
    pub fn predict(&self, x_t: &Matrix<T>, t: usize) -> Result<Matrix<T>> {
        self.predict_eps(x_t, t, &self.mask())
    }

    /// Masked ε-regression loss for a fixed `(t, ε)` draw; adds
    /// `scale · ∂loss/∂θ` into `grad`. `x0` is in diffusion space.
    pub fn loss_and_grad(
        &self,
        x0: &Matrix<T>,
        t: usize,
        eps: &Matrix<T>,
        mask: &CompletionMask,
        sched: &NoiseSchedule<T>,
        scale: T,
        grad: &mut [T],
    ) -> Result<T> {
        if mask.is_empty() {
            return Err(Error::invalid("completion mask is empty: nothing to learn"));
        }
        let x_t = crate::diffusion::forward_noise(x0, t, eps, mask, sched)?;
        self.check_input(&x_t, mask)?;
        let mut g = Graph::new(&self.params);
        let out = self.forward(&mut g, &x_t, t, mask);
        let target = self.pad(eps.as_slice(), T::zero());
        let (ph, pw) = self.config.padded();
        let flags = mask.flags();
        let mut padded_mask = vec![false; ph * pw];
        for r in 0..self.config.height {
            for c in 0..self.config.width {
                padded_mask[r * pw + c] = flags[r * self.config.width + c];
            }
        }
        let loss = g.masked_mse(out, target, padded_mask);
        g.backward(loss, scale, grad);
        Ok(g.value(loss)[0])
    }

    /// Trains with Adam on minibatches of `images` (values in `[0, 1]`).
    ///
    /// Returns the mean sample loss of every epoch. For a fixed
    /// `cfg.seed` the result is bit-reproducible.
    pub fn train(
        &mut self,
        images: &[SignalImage<T>],
        mask: &CompletionMask,
        sched: &NoiseSchedule<T>,
        cfg: &TrainConfig,
    ) -> Result<Vec<T>> {
        if images.is_empty() {
            return Err(Error::invalid("training set is empty"));
        }
        if mask.is_empty() {
            return Err(Error::invalid("completion mask is empty: nothing to learn"));
        }
        if cfg.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        let data: Vec<Matrix<T>> = images.iter().map(|im| to_diffusion_space(im.pixels())).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut opt = Adam::new(self.params.len(), T::lit(cfg.learning_rate));
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![T::zero(); self.params.len()];
        let mut curve = Vec::with_capacity(cfg.epochs);

        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = T::zero();
            for batch in order.chunks(cfg.batch_size) {
                grad.iter_mut().for_each(|v| *v = T::zero());
                let scale = T::one() / T::from_usize_lossy(batch.len());
                for &i in batch {
                    let (t, eps, _) = sample_training_pair(&data[i], mask, sched, &mut rng)?;
                    total += self.loss_and_grad(&data[i], t, &eps, mask, sched, scale, &mut grad)?;
                }
                opt.step(&mut self.params, &grad);
            }
            let mean = total / T::from_usize_lossy(data.len());
            if !mean.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            log::debug!("denoiser epoch {epoch}: loss {mean}");
            curve.push(mean);
        }
        Ok(curve)
    }

    pub fn to_checkpoint(&self, schedule: &ScheduleSpec) -> Result<Vec<u8>> {
        let meta = json!({
            "config": self.config,
            "schedule": schedule,
            "scaler_policy": SCALER_POLICY,
        });
        let params: Vec<f32> = self.params.iter().map(|p| p.as_f64() as f32).collect();
        checkpoint::encode(CHECKPOINT_KIND, meta, &params)
    }

    /// Restores a denoiser and the schedule it was trained with.
    pub fn from_checkpoint(bytes: &[u8]) -> Result<(Self, ScheduleSpec)> {
        let (meta, params) = checkpoint::decode(bytes, CHECKPOINT_KIND)?;
        let config: DenoiserConfig = serde_json::from_value(meta["config"].clone())?;
        let schedule: ScheduleSpec = serde_json::from_value(meta["schedule"].clone())?;
        let mut model = Self::init(config)?;
        if params.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "config implies {} parameters, file holds {}",
                model.params.len(),
                params.len()
            )));
        }
        model.params = params.into_iter().map(|p| T::lit(f64::from(p))).collect();
        Ok((model, schedule))
    }
}

impl<T: Real> EpsModel<T> for Denoiser<T> {
    fn predict_eps(&self, x_t: &Matrix<T>, t: usize, mask: &CompletionMask) -> Result<Matrix<T>> {
        self.check_input(x_t, mask)?;
        let mut g = Graph::new(&self.params);
        let out = self.forward(&mut g, x_t, t, mask);
        let pred = self.crop(g.value(out));
        if !pred.is_finite() {
            return Err(Error::NonFinite("denoiser output"));
        }
        Ok(pred)
    }
}
