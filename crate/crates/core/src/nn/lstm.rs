use super::graph::{Graph, Var};
use super::params::{Init, Layout, ParamRef};
use crate::scalar::Real;

/// Single LSTM layer; gates are packed `[input, forget, cell, output]`.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub input: usize,
    pub hidden: usize,
    w: ParamRef,
    b: ParamRef,
}

impl LstmCell {
    pub fn register(layout: &mut Layout, prefix: &str, input: usize, hidden: usize) -> Self {
        let fan_in = input + hidden;
        let w = layout.add(
            format!("{prefix}.w"),
            &[4 * hidden, fan_in],
            Init::Normal((1.0 / fan_in as f64).sqrt()),
        );
        let b = layout.add(format!("{prefix}.b"), &[4 * hidden], Init::Zeros);
        Self { input, hidden, w, b }
    }

    /// Forget-gate bias offset, for callers that want to bias it open after initialization.
    pub fn forget_bias_range(&self) -> std::ops::Range<usize> {
        self.b.offset + self.hidden..self.b.offset + 2 * self.hidden
    }

    pub fn zero_state<T: Real>(&self, g: &mut Graph<T>) -> (Var, Var) {
        let h = g.input(&[self.hidden], vec![T::zero(); self.hidden]);
        let c = g.input(&[self.hidden], vec![T::zero(); self.hidden]);
        (h, c)
    }

    /// Runs the whole sequence `x [input, T]` from a zero state and returns
    /// the final hidden state.
    pub fn sequence<T: Real>(&self, g: &mut Graph<T>, x: Var) -> Var {
        let w = self.w.var(g);
        let b = self.b.var(g);
        g.lstm(x, w, b)
    }

    /// One time step; returns the new `(h, c)`.
    pub fn step<T: Real>(&self, g: &mut Graph<T>, x: Var, (h, c): (Var, Var)) -> (Var, Var) {
        let n = self.hidden;
        let z = g.concat(x, h);
        let w = self.w.var(g);
        let b = self.b.var(g);
        let gates = g.linear(z, w, b);
        let i = g.slice(gates, 0, n);
        let f = g.slice(gates, n, n);
        let cc = g.slice(gates, 2 * n, n);
        let o = g.slice(gates, 3 * n, n);
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let cc = g.tanh(cc);
        let o = g.sigmoid(o);
        let keep = g.mul(f, c);
        let write = g.mul(i, cc);
        let c_new = g.add(keep, write);
        let squashed = g.tanh(c_new);
        let h_new = g.mul(o, squashed);
        (h_new, c_new)
    }
}
