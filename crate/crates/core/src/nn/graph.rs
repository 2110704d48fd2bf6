//! Reverse-mode automatic differentiation over small dense tensors.
//!
//! A [`Graph`] records one forward evaluation (one sample) as a flat list of
//! nodes. Parameters are views into a caller-owned flat vector; calling
//! [`Graph::backward`] accumulates their gradients into a vector of the same
//! layout. Tensors are unbatched: images are `[C, H, W]`, sequences `[C, T]`,
//! vectors `[n]`.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<T> {
    Input,
    Param { offset: usize },
    Add(Var, Var),
    Mul(Var, Var),
    /// `x[c, ..] + v[c]`
    AddChannel { x: Var, v: Var },
    Relu(Var),
    Silu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Conv2d { x: Var, w: Var, b: Var, k: usize },
    Conv1d { x: Var, w: Var, b: Var, k: usize },
    AvgPool2d(Var),
    AvgPool1d { x: Var, factor: usize },
    Upsample2d(Var),
    Concat(Var, Var),
    GroupNorm { x: Var, gamma: Var, beta: Var, groups: usize, xhat: Vec<T>, rstd: Vec<T> },
    /// `w · x + b` with `w` of shape `[out, in]`.
    Linear { x: Var, w: Var, b: Var },
    Slice { x: Var, start: usize },
    /// Column `t` of a `[C, T]` tensor.
    Column { x: Var, t: usize },
    /// Mean of `(x - target)²` over `mask`ed entries.
    MaskedMse { x: Var, target: Vec<T>, mask: Vec<bool>, count: usize },
    /// Binary cross-entropy of a single logit against a 0/1 target.
    BceLogit { x: Var, target: T },
    /// Whole-sequence LSTM returning the last hidden state. `cache` holds
    /// `[i, f, g, o, c, h]` for every step.
    Lstm { x: Var, w: Var, b: Var, hidden: usize, cache: Vec<T> },
}

struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
}

pub struct Graph<'p, T> {
    params: &'p [T],
    nodes: Vec<Node<T>>,
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p [T]) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node { shape, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, shape: &[usize], value: Vec<T>) -> Var {
        self.push(shape.to_vec(), value, Op::Input)
    }

    /// A parameter tensor stored at `offset` in the flat parameter vector.
    pub fn param(&mut self, offset: usize, shape: &[usize]) -> Var {
        let n: usize = shape.iter().product();
        let value = self.params[offset..offset + n].to_vec();
        self.push(shape.to_vec(), value, Op::Param { offset })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x + *y).collect();
        self.push(self.shape(a).to_vec(), value, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x * *y).collect();
        self.push(self.shape(a).to_vec(), value, Op::Mul(a, b))
    }

    pub fn add_channel(&mut self, x: Var, v: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let c = shape[0];
        assert_eq!(self.shape(v), &[c], "add_channel expects one value per channel");
        let inner = self.value(x).len() / c;
        let vv = self.value(v);
        let value = self
            .value(x)
            .iter()
            .enumerate()
            .map(|(i, &a)| a + vv[i / inner])
            .collect();
        self.push(shape, value, Op::AddChannel { x, v })
    }

    fn unary(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let value = self.value(x).iter().map(|&a| f(a)).collect();
        self.push(self.shape(x).to_vec(), value, op)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |a| a.max(T::zero()), Op::Relu(x))
    }

    pub fn silu(&mut self, x: Var) -> Var {
        self.unary(x, |a| a * sigmoid(a), Op::Silu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, |a| a.tanh(), Op::Tanh(x))
    }

    /// Same-padded stride-1 convolution: `x [Ci, H, W]`, `w [Co, Ci, k, k]`, `b [Co]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (ci, h, wd) = dims3(self.shape(x));
        let ws = self.shape(w).to_vec();
        let (co, k) = (ws[0], ws[2]);
        assert_eq!(ws, vec![co, ci, k, k], "conv2d weight shape");
        assert_eq!(k % 2, 1, "odd kernel");
        let mut out = vec![T::zero(); co * h * wd];
        ConvShape { ci, co, h, w: wd, kh: k, kw: k }.forward(self.value(x), self.value(w), self.value(b), &mut out);
        self.push(vec![co, h, wd], out, Op::Conv2d { x, w, b, k })
    }

    /// Same-padded stride-1 convolution: `x [Ci, T]`, `w [Co, Ci, k]`, `b [Co]`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xs = self.shape(x).to_vec();
        let (ci, t) = (xs[0], xs[1]);
        let ws = self.shape(w).to_vec();
        let (co, k) = (ws[0], ws[2]);
        assert_eq!(ws, vec![co, ci, k], "conv1d weight shape");
        // A 1-D convolution is a 2-D one over a height-1 image.
        let mut out = vec![T::zero(); co * t];
        ConvShape { ci, co, h: 1, w: t, kh: 1, kw: k }.forward(self.value(x), self.value(w), self.value(b), &mut out);
        self.push(vec![co, t], out, Op::Conv1d { x, w, b, k })
    }

    pub fn avg_pool2d(&mut self, x: Var) -> Var {
        let (c, h, w) = dims3(self.shape(x));
        assert!(h % 2 == 0 && w % 2 == 0, "avg_pool2d needs even spatial dims");
        let (oh, ow) = (h / 2, w / 2);
        let xv = self.value(x);
        let q = T::lit(0.25);
        let mut out = vec![T::zero(); c * oh * ow];
        for ch in 0..c {
            for y in 0..oh {
                for z in 0..ow {
                    let base = ch * h * w;
                    let s = xv[base + 2 * y * w + 2 * z]
                        + xv[base + 2 * y * w + 2 * z + 1]
                        + xv[base + (2 * y + 1) * w + 2 * z]
                        + xv[base + (2 * y + 1) * w + 2 * z + 1];
                    out[ch * oh * ow + y * ow + z] = s * q;
                }
            }
        }
        self.push(vec![c, oh, ow], out, Op::AvgPool2d(x))
    }

    /// Averages non-overlapping runs of `factor` time steps; a ragged tail is dropped.
    pub fn avg_pool1d(&mut self, x: Var, factor: usize) -> Var {
        let xs = self.shape(x).to_vec();
        let (c, t) = (xs[0], xs[1]);
        let ot = t / factor;
        assert!(ot > 0, "sequence shorter than pooling factor");
        let xv = self.value(x);
        let inv = T::one() / T::from_usize_lossy(factor);
        let mut out = vec![T::zero(); c * ot];
        for ch in 0..c {
            for o in 0..ot {
                let s: T = xv[ch * t + o * factor..ch * t + (o + 1) * factor].iter().copied().sum();
                out[ch * ot + o] = s * inv;
            }
        }
        self.push(vec![c, ot], out, Op::AvgPool1d { x, factor })
    }

    /// Nearest-neighbour 2× upsampling.
    pub fn upsample2d(&mut self, x: Var) -> Var {
        let (c, h, w) = dims3(self.shape(x));
        let (oh, ow) = (2 * h, 2 * w);
        let xv = self.value(x);
        let mut out = vec![T::zero(); c * oh * ow];
        for ch in 0..c {
            for y in 0..oh {
                for z in 0..ow {
                    out[ch * oh * ow + y * ow + z] = xv[ch * h * w + (y / 2) * w + z / 2];
                }
            }
        }
        self.push(vec![c, oh, ow], out, Op::Upsample2d(x))
    }

    /// Concatenation along the leading (channel) axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        assert_eq!(sa[1..], sb[1..], "concat trailing dims");
        let mut shape = sa.clone();
        shape[0] += sb[0];
        let mut value = self.value(a).to_vec();
        value.extend_from_slice(self.value(b));
        self.push(shape, value, Op::Concat(a, b))
    }

    /// Group normalization with per-channel affine `gamma`, `beta`.
    pub fn group_norm(&mut self, x: Var, gamma: Var, beta: Var, groups: usize) -> Var {
        let shape = self.shape(x).to_vec();
        let c = shape[0];
        assert_eq!(c % groups, 0, "groups must divide channels");
        let xv = self.value(x);
        let inner = xv.len() / c;
        let per = xv.len() / groups;
        let eps = T::lit(1e-5);
        let mut xhat = vec![T::zero(); xv.len()];
        let mut rstd = vec![T::zero(); groups];
        for g in 0..groups {
            let seg = &xv[g * per..(g + 1) * per];
            let n = T::from_usize_lossy(per);
            let mean = seg.iter().copied().sum::<T>() / n;
            let var = seg.iter().map(|&a| (a - mean) * (a - mean)).sum::<T>() / n;
            let r = T::one() / (var + eps).sqrt();
            rstd[g] = r;
            for (o, &a) in xhat[g * per..(g + 1) * per].iter_mut().zip(seg) {
                *o = (a - mean) * r;
            }
        }
        let (gv, bv) = (self.value(gamma), self.value(beta));
        let value = xhat
            .iter()
            .enumerate()
            .map(|(i, &h)| h * gv[i / inner] + bv[i / inner])
            .collect();
        self.push(shape, value, Op::GroupNorm { x, gamma, beta, groups, xhat, rstd })
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let ws = self.shape(w).to_vec();
        let (out_dim, in_dim) = (ws[0], ws[1]);
        assert_eq!(self.value(x).len(), in_dim, "linear input size");
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let value = (0..out_dim)
            .map(|o| {
                let row = &wv[o * in_dim..(o + 1) * in_dim];
                bv[o] + dot(row, xv)
            })
            .collect();
        self.push(vec![out_dim], value, Op::Linear { x, w, b })
    }

    /// Contiguous slice `[start, start + len)` of the flattened tensor, as a vector.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let value = self.value(x)[start..start + len].to_vec();
        self.push(vec![len], value, Op::Slice { x, start })
    }

    pub fn column(&mut self, x: Var, t: usize) -> Var {
        let xs = self.shape(x).to_vec();
        let (c, len) = (xs[0], xs[1]);
        let xv = self.value(x);
        let value = (0..c).map(|ch| xv[ch * len + t]).collect();
        self.push(vec![c], value, Op::Column { x, t })
    }

    pub fn masked_mse(&mut self, x: Var, target: Vec<T>, mask: Vec<bool>) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.len(), target.len());
        assert_eq!(xv.len(), mask.len());
        let count = mask.iter().filter(|&&m| m).count();
        assert!(count > 0, "empty mask");
        let s: T = xv
            .iter()
            .zip(&target)
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|((&a, &b), _)| (a - b) * (a - b))
            .sum();
        let value = vec![s / T::from_usize_lossy(count)];
        self.push(vec![1], value, Op::MaskedMse { x, target, mask, count })
    }

    /// Runs an LSTM over `x [I, T]` from a zero state and returns the final
    /// hidden state `[H]`. Gates in `w [4H, I + H]` and `b [4H]` are packed
    /// `[input, forget, cell, output]`.
    pub fn lstm(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xs = self.shape(x).to_vec();
        let (inp, steps) = (xs[0], xs[1]);
        let ws = self.shape(w).to_vec();
        let hidden = ws[0] / 4;
        assert_eq!(ws, vec![4 * hidden, inp + hidden], "lstm weight shape");
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let fan = inp + hidden;
        let mut cache = vec![T::zero(); steps * 6 * hidden];
        let mut z = vec![T::zero(); fan];
        let mut a = vec![T::zero(); 4 * hidden];
        let (mut h, mut c) = (vec![T::zero(); hidden], vec![T::zero(); hidden]);
        for t in 0..steps {
            for i in 0..inp {
                z[i] = xv[i * steps + t];
            }
            z[inp..].copy_from_slice(&h);
            for (r, av) in a.iter_mut().enumerate() {
                *av = bv[r] + dot(&wv[r * fan..(r + 1) * fan], &z);
            }
            let step = &mut cache[t * 6 * hidden..(t + 1) * 6 * hidden];
            for j in 0..hidden {
                let ig = sigmoid(a[j]);
                let fg = sigmoid(a[hidden + j]);
                let gg = a[2 * hidden + j].tanh();
                let og = sigmoid(a[3 * hidden + j]);
                c[j] = fg * c[j] + ig * gg;
                h[j] = og * c[j].tanh();
                for (k, v) in [ig, fg, gg, og, c[j], h[j]].into_iter().enumerate() {
                    step[k * hidden + j] = v;
                }
            }
        }
        self.push(vec![hidden], h, Op::Lstm { x, w, b, hidden, cache })
    }

    pub fn bce_logit(&mut self, x: Var, target: T) -> Var {
        let z = self.value(x)[0];
        // log(1 + e^z) - y z, stable for either sign of z.
        let value = vec![z.max(T::zero()) - z * target + (T::one() + (-z.abs()).exp()).ln()];
        self.push(vec![1], value, Op::BceLogit { x, target })
    }

    /// Back-propagates from the scalar `loss` (seeded with `scale`) and adds
    /// parameter gradients into `grad`.
    pub fn backward(&self, loss: Var, scale: T, grad: &mut [T]) {
        assert_eq!(grad.len(), self.params.len(), "gradient buffer layout");
        let mut grads: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![scale; self.nodes[loss.0].value.len()]);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Input => {}
                Op::Param { offset } => {
                    for (d, s) in grad[*offset..*offset + g.len()].iter_mut().zip(&g) {
                        *d += *s;
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga: Vec<T> = g.iter().zip(bv).map(|(x, y)| *x * *y).collect();
                    let gb: Vec<T> = g.iter().zip(av).map(|(x, y)| *x * *y).collect();
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::AddChannel { x, v } => {
                    let c = self.nodes[v.0].value.len();
                    let inner = g.len() / c;
                    let gv: Vec<T> = g.chunks(inner).map(|ch| ch.iter().copied().sum()).collect();
                    accumulate(&mut grads, *x, &g);
                    accumulate(&mut grads, *v, &gv);
                }
                Op::Relu(x) => {
                    let xv = &self.nodes[x.0].value;
                    let gx: Vec<T> = g
                        .iter()
                        .zip(xv)
                        .map(|(&d, &a)| if a > T::zero() { d } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Silu(x) => {
                    let xv = &self.nodes[x.0].value;
                    let gx: Vec<T> = g
                        .iter()
                        .zip(xv)
                        .map(|(&d, &a)| {
                            let s = sigmoid(a);
                            d * s * (T::one() + a * (T::one() - s))
                        })
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Sigmoid(x) => {
                    let gx: Vec<T> = g
                        .iter()
                        .zip(&node.value)
                        .map(|(&d, &s)| d * s * (T::one() - s))
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Tanh(x) => {
                    let gx: Vec<T> = g
                        .iter()
                        .zip(&node.value)
                        .map(|(&d, &y)| d * (T::one() - y * y))
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Conv2d { x, w, b, k } => {
                    let (ci, h, wd) = dims3(&self.nodes[x.0].shape);
                    let co = self.nodes[w.0].shape[0];
                    let mut gx = vec![T::zero(); ci * h * wd];
                    let mut gw = vec![T::zero(); co * ci * k * k];
                    ConvShape { ci, co, h, w: wd, kh: *k, kw: *k }.backward(&self.nodes[x.0].value, &self.nodes[w.0].value, &g, &mut gx, &mut gw);
                    let gb: Vec<T> = g.chunks(h * wd).map(|c| c.iter().copied().sum()).collect();
                    accumulate(&mut grads, *x, &gx);
                    accumulate(&mut grads, *w, &gw);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Conv1d { x, w, b, k } => {
                    let xs = &self.nodes[x.0].shape;
                    let (ci, t) = (xs[0], xs[1]);
                    let co = self.nodes[w.0].shape[0];
                    let mut gx = vec![T::zero(); ci * t];
                    let mut gw = vec![T::zero(); co * ci * k];
                    ConvShape { ci, co, h: 1, w: t, kh: 1, kw: *k }.backward(&self.nodes[x.0].value, &self.nodes[w.0].value, &g, &mut gx, &mut gw);
                    let gb: Vec<T> = g.chunks(t).map(|c| c.iter().copied().sum()).collect();
                    accumulate(&mut grads, *x, &gx);
                    accumulate(&mut grads, *w, &gw);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::AvgPool2d(x) => {
                    let (c, h, w) = dims3(&self.nodes[x.0].shape);
                    let (oh, ow) = (h / 2, w / 2);
                    let q = T::lit(0.25);
                    let mut gx = vec![T::zero(); c * h * w];
                    for ch in 0..c {
                        for y in 0..h {
                            for z in 0..w {
                                gx[ch * h * w + y * w + z] = g[ch * oh * ow + (y / 2) * ow + z / 2] * q;
                            }
                        }
                    }
                    accumulate(&mut grads, *x, &gx);
                }
                Op::AvgPool1d { x, factor } => {
                    let xs = &self.nodes[x.0].shape;
                    let (c, t) = (xs[0], xs[1]);
                    let ot = t / factor;
                    let inv = T::one() / T::from_usize_lossy(*factor);
                    let mut gx = vec![T::zero(); c * t];
                    for ch in 0..c {
                        for i in 0..ot * factor {
                            gx[ch * t + i] = g[ch * ot + i / factor] * inv;
                        }
                    }
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Upsample2d(x) => {
                    let (c, h, w) = dims3(&self.nodes[x.0].shape);
                    let (oh, ow) = (2 * h, 2 * w);
                    let mut gx = vec![T::zero(); c * h * w];
                    for ch in 0..c {
                        for y in 0..oh {
                            for z in 0..ow {
                                gx[ch * h * w + (y / 2) * w + z / 2] += g[ch * oh * ow + y * ow + z];
                            }
                        }
                    }
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Concat(a, b) => {
                    let na = self.nodes[a.0].value.len();
                    accumulate(&mut grads, *a, &g[..na]);
                    accumulate(&mut grads, *b, &g[na..]);
                }
                Op::GroupNorm { x, gamma, beta, groups, xhat, rstd } => {
                    let c = self.nodes[gamma.0].value.len();
                    let inner = g.len() / c;
                    let per = g.len() / groups;
                    let gv = &self.nodes[gamma.0].value;
                    let mut ggamma = vec![T::zero(); c];
                    let mut gbeta = vec![T::zero(); c];
                    for (i, (&d, &h)) in g.iter().zip(xhat).enumerate() {
                        ggamma[i / inner] += d * h;
                        gbeta[i / inner] += d;
                    }
                    let mut gx = vec![T::zero(); g.len()];
                    let n = T::from_usize_lossy(per);
                    for grp in 0..*groups {
                        let range = grp * per..(grp + 1) * per;
                        let dxhat: Vec<T> = range.clone().map(|i| g[i] * gv[i / inner]).collect();
                        let sum_d: T = dxhat.iter().copied().sum();
                        let sum_dh: T = dxhat.iter().zip(&xhat[range.clone()]).map(|(a, b)| *a * *b).sum();
                        let r = rstd[grp];
                        for (j, i) in range.enumerate() {
                            gx[i] = r / n * (n * dxhat[j] - sum_d - xhat[i] * sum_dh);
                        }
                    }
                    accumulate(&mut grads, *x, &gx);
                    accumulate(&mut grads, *gamma, &ggamma);
                    accumulate(&mut grads, *beta, &gbeta);
                }
                Op::Linear { x, w, b } => {
                    let ws = &self.nodes[w.0].shape;
                    let in_dim = ws[1];
                    let (xv, wv) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
                    let mut gx = vec![T::zero(); in_dim];
                    let mut gw = vec![T::zero(); wv.len()];
                    for (o, &d) in g.iter().enumerate() {
                        if d == T::zero() {
                            continue;
                        }
                        let row = &wv[o * in_dim..(o + 1) * in_dim];
                        for ((gxi, &wi), (gwi, &xi)) in gx
                            .iter_mut()
                            .zip(row)
                            .zip(gw[o * in_dim..(o + 1) * in_dim].iter_mut().zip(xv))
                        {
                            *gxi += d * wi;
                            *gwi += d * xi;
                        }
                    }
                    accumulate(&mut grads, *x, &gx);
                    accumulate(&mut grads, *w, &gw);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Slice { x, start } => {
                    let n = self.nodes[x.0].value.len();
                    let mut gx = vec![T::zero(); n];
                    gx[*start..*start + g.len()].copy_from_slice(&g);
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Lstm { x, w, b, hidden, cache } => {
                    let n = *hidden;
                    let xs = &self.nodes[x.0].shape;
                    let (inp, steps) = (xs[0], xs[1]);
                    let fan = inp + n;
                    let (xv, wv) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
                    let mut gx = vec![T::zero(); inp * steps];
                    let mut gw = vec![T::zero(); 4 * n * fan];
                    let mut gb = vec![T::zero(); 4 * n];
                    let mut dh = g.clone();
                    let mut dc = vec![T::zero(); n];
                    let mut da = vec![T::zero(); 4 * n];
                    let mut z = vec![T::zero(); fan];
                    let zero = vec![T::zero(); n];
                    for t in (0..steps).rev() {
                        let cur = &cache[t * 6 * n..(t + 1) * 6 * n];
                        let (ig, fg, gg, og, cc) =
                            (&cur[..n], &cur[n..2 * n], &cur[2 * n..3 * n], &cur[3 * n..4 * n], &cur[4 * n..5 * n]);
                        let (c_prev, h_prev) = if t == 0 {
                            (&zero[..], &zero[..])
                        } else {
                            let prev = &cache[(t - 1) * 6 * n..t * 6 * n];
                            (&prev[4 * n..5 * n], &prev[5 * n..])
                        };
                        for j in 0..n {
                            let tc = cc[j].tanh();
                            let d_o = dh[j] * tc;
                            dc[j] += dh[j] * og[j] * (T::one() - tc * tc);
                            da[j] = dc[j] * gg[j] * ig[j] * (T::one() - ig[j]);
                            da[n + j] = dc[j] * c_prev[j] * fg[j] * (T::one() - fg[j]);
                            da[2 * n + j] = dc[j] * ig[j] * (T::one() - gg[j] * gg[j]);
                            da[3 * n + j] = d_o * og[j] * (T::one() - og[j]);
                            dc[j] *= fg[j];
                        }
                        for i in 0..inp {
                            z[i] = xv[i * steps + t];
                        }
                        z[inp..].copy_from_slice(h_prev);
                        let mut dz = vec![T::zero(); fan];
                        for (r, &d) in da.iter().enumerate() {
                            gb[r] += d;
                            axpy(d, &z, &mut gw[r * fan..(r + 1) * fan]);
                            axpy(d, &wv[r * fan..(r + 1) * fan], &mut dz);
                        }
                        for i in 0..inp {
                            gx[i * steps + t] = dz[i];
                        }
                        dh.copy_from_slice(&dz[inp..]);
                    }
                    accumulate(&mut grads, *x, &gx);
                    accumulate(&mut grads, *w, &gw);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Column { x, t } => {
                    let xs = &self.nodes[x.0].shape;
                    let (c, len) = (xs[0], xs[1]);
                    let mut gx = vec![T::zero(); c * len];
                    for ch in 0..c {
                        gx[ch * len + t] = g[ch];
                    }
                    accumulate(&mut grads, *x, &gx);
                }
                Op::MaskedMse { x, target, mask, count } => {
                    let xv = &self.nodes[x.0].value;
                    let k = g[0] * T::lit(2.0) / T::from_usize_lossy(*count);
                    let gx: Vec<T> = xv
                        .iter()
                        .zip(target)
                        .zip(mask)
                        .map(|((&a, &b), &m)| if m { k * (a - b) } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::BceLogit { x, target } => {
                    let z = self.nodes[x.0].value[0];
                    accumulate(&mut grads, *x, &[g[0] * (sigmoid(z) - *target)]);
                }
            }
        }
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, g: &[T]) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, d) in existing.iter_mut().zip(g) {
                *e += *d;
            }
        }
        slot @ None => *slot = Some(g.to_vec()),
    }
}

fn dims3(s: &[usize]) -> (usize, usize, usize) {
    assert_eq!(s.len(), 3, "expected [C, H, W]");
    (s[0], s[1], s[2])
}

#[inline]
pub(crate) fn sigmoid<T: Real>(a: T) -> T {
    if a >= T::zero() {
        T::one() / (T::one() + (-a).exp())
    } else {
        let e = a.exp();
        e / (T::one() + e)
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    // Eight independent partial sums let the compiler vectorize the loop.
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| *x * *y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().copied().sum::<T>() + tail
}

/// Valid output index range `[lo, hi)` along one axis for kernel offset `d`
/// so that `i + d` stays within `[0, n)`.
#[inline]
fn valid_range(n: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d).clamp(0, n as isize) as usize;
    (lo.min(hi), hi)
}

/// Geometry of a same-padded, stride-1 convolution over `[ci, h, w]`
/// with a `kh × kw` kernel (1-D convolutions use `h = kh = 1`).
#[derive(Clone, Copy)]
struct ConvShape {
    ci: usize,
    co: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
}

impl ConvShape {
    fn taps(&self) -> usize {
        self.ci * self.kh * self.kw
    }

    fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Visits every (patch row, output pixel range, source range) triple of the
    /// unrolled-patch matrix; out-of-bounds taps are skipped (zero padding).
    fn for_each_run(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        let (ph, pw) = ((self.kh / 2) as isize, (self.kw / 2) as isize);
        for i in 0..self.ci {
            for ky in 0..self.kh {
                let dy = ky as isize - ph;
                let (ylo, yhi) = valid_range(self.h, dy);
                for kx in 0..self.kw {
                    let dx = kx as isize - pw;
                    let (xlo, xhi) = valid_range(self.w, dx);
                    let row = (i * self.kh + ky) * self.kw + kx;
                    for y in ylo..yhi {
                        let sy = (y as isize + dy) as usize;
                        let src = i * self.plane() + sy * self.w + (xlo as isize + dx) as usize;
                        f(row, y * self.w + xlo, src, xhi - xlo);
                    }
                }
            }
        }
    }

    /// Unrolls `x` into a `[taps, h·w]` patch matrix.
    fn im2col<T: Real>(&self, x: &[T]) -> Vec<T> {
        let plane = self.plane();
        let mut cols = vec![T::zero(); self.taps() * plane];
        self.for_each_run(|row, dst, src, len| {
            cols[row * plane + dst..row * plane + dst + len].copy_from_slice(&x[src..src + len]);
        });
        cols
    }

    /// Adds a patch-matrix gradient back onto the input layout.
    fn col2im<T: Real>(&self, cols: &[T], gx: &mut [T]) {
        let plane = self.plane();
        self.for_each_run(|row, dst, src, len| {
            let from = &cols[row * plane + dst..row * plane + dst + len];
            for (g, &c) in gx[src..src + len].iter_mut().zip(from) {
                *g += c;
            }
        });
    }

    fn forward<T: Real>(&self, x: &[T], w: &[T], b: &[T], out: &mut [T]) {
        let (plane, taps) = (self.plane(), self.taps());
        let cols = self.im2col(x);
        for o in 0..self.co {
            let dst = &mut out[o * plane..(o + 1) * plane];
            dst.iter_mut().for_each(|v| *v = b[o]);
            for (kk, &wv) in w[o * taps..(o + 1) * taps].iter().enumerate() {
                axpy(wv, &cols[kk * plane..(kk + 1) * plane], dst);
            }
        }
    }

    fn backward<T: Real>(&self, x: &[T], w: &[T], g: &[T], gx: &mut [T], gw: &mut [T]) {
        let (plane, taps) = (self.plane(), self.taps());
        let cols = self.im2col(x);
        let mut gcols = vec![T::zero(); taps * plane];
        for o in 0..self.co {
            let go = &g[o * plane..(o + 1) * plane];
            for kk in 0..taps {
                let patch = &cols[kk * plane..(kk + 1) * plane];
                gw[o * taps + kk] += dot(go, patch);
                axpy(w[o * taps + kk], go, &mut gcols[kk * plane..(kk + 1) * plane]);
            }
        }
        self.col2im(&gcols, gx);
    }
}

/// `y += a · x`
#[inline]
fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Checks d(loss)/d(params) from `backward` against central differences.
    fn check(params: &[f64], build: impl Fn(&mut Graph<f64>) -> Var) {
        let mut grad = vec![0.0; params.len()];
        {
            let mut g = Graph::new(params);
            let loss = build(&mut g);
            g.backward(loss, 1.0, &mut grad);
        }
        let h = 1e-6;
        for i in 0..params.len() {
            let mut p = params.to_vec();
            p[i] += h;
            let up = {
                let mut g = Graph::new(&p);
                let l = build(&mut g);
                g.value(l)[0]
            };
            p[i] -= 2.0 * h;
            let down = {
                let mut g = Graph::new(&p);
                let l = build(&mut g);
                g.value(l)[0]
            };
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            assert!(err < 1e-5 || (fd - grad[i]).abs() < 1e-8, "param {i}: fd {fd} vs analytic {}", grad[i]);
        }
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn conv_norm_pool_chain_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // w1 [3,2,3,3] b1 [3] gamma [3] beta [3] w2 [2,6,3,3] b2 [2]
        let sizes = [54, 3, 3, 3, 108, 2, 3];
        let params = rand_vec(&mut rng, sizes.iter().sum());
        let input = rand_vec(&mut rng, 2 * 4 * 6);
        let target = rand_vec(&mut rng, 2 * 4 * 6);
        let mask: Vec<bool> = (0..48).map(|i| i % 3 != 0).collect();
        check(&params, |g| {
            let x = g.input(&[2, 4, 6], input.clone());
            let w1 = g.param(0, &[3, 2, 3, 3]);
            let b1 = g.param(54, &[3]);
            let gam = g.param(57, &[3]);
            let bet = g.param(60, &[3]);
            let tv = g.param(171, &[3]);
            let h = g.conv2d(x, w1, b1);
            let h = g.group_norm(h, gam, bet, 3);
            let h = g.add_channel(h, tv);
            let h = g.silu(h);
            let d = g.avg_pool2d(h);
            let u = g.upsample2d(d);
            let cat = g.concat(u, h);
            let w2 = g.param(63, &[2, 6, 3, 3]);
            let b2 = g.param(169, &[2]);
            let y = g.conv2d(cat, w2, b2);
            g.masked_mse(y, target.clone(), mask.clone())
        });
    }

    #[test]
    fn recurrent_pieces_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // conv1d w [2,3,5] b [2]; linear w [8, 4] b [8]; head w [1,2] b [1]
        let params = rand_vec(&mut rng, 30 + 2 + 32 + 8 + 2 + 1);
        let seq = rand_vec(&mut rng, 3 * 8);
        check(&params, |g| {
            let x = g.input(&[3, 8], seq.clone());
            let w = g.param(0, &[2, 3, 5]);
            let b = g.param(30, &[2]);
            let h = g.conv1d(x, w, b);
            let h = g.relu(h);
            let h = g.avg_pool1d(h, 3);
            let mut state = g.input(&[2], vec![0.0; 2]);
            for t in 0..2 {
                let col = g.column(h, t);
                let z = g.concat(col, state);
                let lw = g.param(32, &[8, 4]);
                let lb = g.param(64, &[8]);
                let gates = g.linear(z, lw, lb);
                let a = g.slice(gates, 0, 2);
                let bq = g.slice(gates, 2, 2);
                let a = g.sigmoid(a);
                let bq = g.tanh(bq);
                let prod = g.mul(a, bq);
                state = g.add(prod, state);
            }
            let hw = g.param(72, &[1, 2]);
            let hb = g.param(74, &[1]);
            let logit = g.linear(state, hw, hb);
            g.bce_logit(logit, 1.0)
        });
    }

    #[test]
    fn fused_lstm_matches_cell_and_differences() {
        use crate::nn::{Layout, LstmCell};
        let mut layout = Layout::new();
        let cell = LstmCell::register(&mut layout, "l", 3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = rand_vec(&mut rng, layout.total() + 5);
        let seq = rand_vec(&mut rng, 3 * 6);
        let head = layout.total();

        let mut g = Graph::new(&params);
        let x = g.input(&[3, 6], seq.clone());
        let fused = cell.sequence(&mut g, x);
        let mut state = cell.zero_state(&mut g);
        for t in 0..6 {
            let col = g.column(x, t);
            state = cell.step(&mut g, col, state);
        }
        for (a, b) in g.value(fused).iter().zip(g.value(state.0)) {
            assert!((a - b).abs() < 1e-12);
        }

        check(&params, |g| {
            let x = g.input(&[3, 6], seq.clone());
            let h = cell.sequence(g, x);
            let hw = g.param(head, &[1, 4]);
            let hb = g.param(head + 4, &[1]);
            let logit = g.linear(h, hw, hb);
            g.bce_logit(logit, 0.0)
        });
    }

    #[test]
    fn bce_is_stable_for_large_logits() {
        let p = [];
        let mut g = Graph::<f64>::new(&p);
        let z = g.input(&[1], vec![800.0]);
        let l = g.bce_logit(z, 0.0);
        assert!((g.value(l)[0] - 800.0).abs() < 1e-9);
        let z = g.input(&[1], vec![-800.0]);
        let l = g.bce_logit(z, 0.0);
        assert!(g.value(l)[0].abs() < 1e-12);
    }
}
