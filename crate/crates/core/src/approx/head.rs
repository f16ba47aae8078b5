use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network shape of a head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// `W x + b`.
    Linear,
    /// `W x`: a table lookup when the input is one-hot, one free logit per
    /// (input, output) pair.
    Tabular,
    /// One tanh hidden layer.
    Mlp { hidden: usize },
    /// A gated recurrent cell followed by a linear read-out.
    Recurrent { hidden: usize },
}

impl Architecture {
    pub fn hidden(&self) -> usize {
        match *self {
            Architecture::Linear | Architecture::Tabular => 0,
            Architecture::Mlp { hidden } | Architecture::Recurrent { hidden } => hidden,
        }
    }

    pub fn param_len(&self, inputs: usize, outputs: usize) -> usize {
        match *self {
            Architecture::Linear => outputs * inputs + outputs,
            Architecture::Tabular => outputs * inputs,
            Architecture::Mlp { hidden } => hidden * inputs + hidden + outputs * hidden + outputs,
            Architecture::Recurrent { hidden } => {
                3 * hidden * inputs
                    + 3 * hidden
                    + 3 * hidden * hidden
                    + 3 * hidden
                    + outputs * hidden
                    + outputs
            }
        }
    }
}

/// A parametric head over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub arch: Architecture,
    pub inputs: usize,
    pub outputs: usize,
    pub params: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// `out += W x` for row-major `w` of shape `(out.len(), x.len())`.
fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(n)) {
        *o += dot(row, x);
    }
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out += W^T g`.
fn matvec_t_add(w: &[f64], g: &[f64], out: &mut [f64]) {
    let n = out.len();
    for (gi, row) in g.iter().zip(w.chunks_exact(n)) {
        if *gi != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += gi * a;
            }
        }
    }
}

/// `dw += g x^T`.
fn outer_add(g: &[f64], x: &[f64], dw: &mut [f64]) {
    let n = x.len();
    for (gi, row) in g.iter().zip(dw.chunks_exact_mut(n)) {
        if *gi != 0.0 {
            for (d, xj) in row.iter_mut().zip(x) {
                *d += gi * xj;
            }
        }
    }
}

/// Splits a flat vector into consecutive slices of the given lengths.
fn split<'a>(mut p: &'a [f64], lens: &[usize]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(lens.len());
    for &l in lens {
        let (a, b) = p.split_at(l);
        out.push(a);
        p = b;
    }
    out
}

fn split_mut<'a>(mut p: &'a mut [f64], lens: &[usize]) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(lens.len());
    for &l in lens {
        let (a, b) = core::mem::take(&mut p).split_at_mut(l);
        out.push(a);
        p = b;
    }
    out
}

struct GruCache {
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    hn: Vec<f64>,
    h_new: Vec<f64>,
}

impl Head {
    /// Zero parameters everywhere: a uniform policy or a zero value.
    pub fn zeros(arch: Architecture, inputs: usize, outputs: usize) -> Self {
        Head {
            arch,
            inputs,
            outputs,
            params: vec![0.0; arch.param_len(inputs, outputs)],
        }
    }

    /// Uniform `±1/sqrt(fan_in)` hidden weights and a zero output layer, so a fresh
    /// policy head is uniform and a fresh value head outputs zero.
    pub fn init(arch: Architecture, inputs: usize, outputs: usize, rng: &mut impl RngCore) -> Self {
        let mut head = Head::zeros(arch, inputs, outputs);
        let h = arch.hidden();
        let scale_in = 1.0 / libm::sqrt(inputs.max(1) as f64);
        let hidden_weights = match arch {
            Architecture::Linear | Architecture::Tabular => 0,
            Architecture::Mlp { .. } => h * inputs,
            Architecture::Recurrent { .. } => 3 * h * inputs,
        };
        for p in &mut head.params[..hidden_weights] {
            *p = rng.random_range(-scale_in..scale_in);
        }
        if let Architecture::Recurrent { .. } = arch {
            let scale_h = 1.0 / libm::sqrt(h.max(1) as f64);
            let start = 3 * h * inputs + 3 * h;
            for p in &mut head.params[start..start + 3 * h * h] {
                *p = rng.random_range(-scale_h..scale_h);
            }
        }
        head
    }

    pub fn param_len(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.inputs {
            return Err(Error::Shape {
                expected: self.inputs,
                got: input.len(),
            });
        }
        Ok(())
    }

    fn check_hidden(&self, hidden: Option<&[f64]>) -> Result<()> {
        if let (Architecture::Recurrent { hidden: h }, Some(state)) = (self.arch, hidden) {
            if state.len() != h {
                return Err(Error::Shape {
                    expected: h,
                    got: state.len(),
                });
            }
        }
        Ok(())
    }

    /// Output for `input`; recurrent heads also thread `hidden` (zeros if `None`)
    /// and return the next hidden state.
    pub fn forward(
        &self,
        input: &[f64],
        hidden: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        self.check_input(input)?;
        self.check_hidden(hidden)?;
        Ok(match self.arch {
            Architecture::Linear => {
                let (w, b) = self.params.split_at(self.outputs * self.inputs);
                let mut out = b.to_vec();
                matvec_add(w, input, &mut out);
                (out, None)
            }
            Architecture::Tabular => {
                let mut out = vec![0.0; self.outputs];
                matvec_add(&self.params, input, &mut out);
                (out, None)
            }
            Architecture::Mlp { hidden: h } => {
                let (out, _) = self.mlp_forward(input, h);
                (out, None)
            }
            Architecture::Recurrent { hidden: h } => {
                let zeros = vec![0.0; h];
                let prev = hidden.unwrap_or(&zeros);
                let (out, cache) = self.gru_forward(input, prev, h);
                (out, Some(cache.h_new))
            }
        })
    }

    /// Feed-forward output (recurrent heads start from a zero hidden state).
    pub fn output(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input, None)?.0)
    }

    /// Like [`Head::output`], also returning the activations that
    /// [`Head::accumulate_grad_traced`] reuses (empty unless the head is an MLP).
    pub fn output_traced(&self, input: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.arch {
            Architecture::Mlp { hidden: h } => {
                self.check_input(input)?;
                Ok(self.mlp_forward(input, h))
            }
            _ => Ok((self.output(input)?, Vec::new())),
        }
    }

    /// [`Head::accumulate_grad`] for a feed-forward call, given the trace that
    /// [`Head::output_traced`] returned for the same input and parameters.
    pub fn accumulate_grad_traced(
        &self,
        input: &[f64],
        trace: &[f64],
        cotangent: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        match self.arch {
            Architecture::Mlp { hidden: h } if trace.len() == h => {
                self.check_input(input)?;
                if cotangent.len() != self.outputs {
                    return Err(Error::Shape {
                        expected: self.outputs,
                        got: cotangent.len(),
                    });
                }
                if grad.len() != self.params.len() {
                    return Err(Error::Shape {
                        expected: self.params.len(),
                        got: grad.len(),
                    });
                }
                self.mlp_backward(input, trace, h, cotangent, grad);
                Ok(())
            }
            _ => self.accumulate_grad(input, None, cotangent, grad),
        }
    }

    fn mlp_backward(
        &self,
        input: &[f64],
        act: &[f64],
        h: usize,
        cotangent: &[f64],
        grad: &mut [f64],
    ) {
        let lens = self.mlp_lens(h);
        let p = split(&self.params, &lens);
        let mut dh = vec![0.0; h];
        matvec_t_add(p[2], cotangent, &mut dh);
        let mut g = split_mut(grad, &lens);
        outer_add(cotangent, act, g[2]);
        for (d, c) in g[3].iter_mut().zip(cotangent) {
            *d += c;
        }
        for k in 0..h {
            dh[k] *= 1.0 - act[k] * act[k];
        }
        outer_add(&dh, input, g[0]);
        for (d, c) in g[1].iter_mut().zip(&dh) {
            *d += c;
        }
    }

    fn mlp_lens(&self, h: usize) -> [usize; 4] {
        [h * self.inputs, h, self.outputs * h, self.outputs]
    }

    fn mlp_forward(&self, input: &[f64], h: usize) -> (Vec<f64>, Vec<f64>) {
        let p = split(&self.params, &self.mlp_lens(h));
        let mut act = p[1].to_vec();
        matvec_add(p[0], input, &mut act);
        for a in &mut act {
            *a = libm::tanh(*a);
        }
        let mut out = p[3].to_vec();
        matvec_add(p[2], &act, &mut out);
        (out, act)
    }

    fn gru_lens(&self, h: usize) -> [usize; 14] {
        let (i, o) = (self.inputs, self.outputs);
        [
            h * i,
            h * i,
            h * i,
            h,
            h,
            h,
            h * h,
            h * h,
            h * h,
            h,
            h,
            h,
            o * h,
            o,
        ]
    }

    fn gru_forward(&self, input: &[f64], prev: &[f64], h: usize) -> (Vec<f64>, GruCache) {
        let p = split(&self.params, &self.gru_lens(h));
        let (w_ir, w_iz, w_in, b_ir, b_iz, b_in) = (p[0], p[1], p[2], p[3], p[4], p[5]);
        let (w_hr, w_hz, w_hn, b_hr, b_hz, b_hn) = (p[6], p[7], p[8], p[9], p[10], p[11]);
        let mut r = b_ir.to_vec();
        matvec_add(w_ir, input, &mut r);
        matvec_add(w_hr, prev, &mut r);
        let mut z = b_iz.to_vec();
        matvec_add(w_iz, input, &mut z);
        matvec_add(w_hz, prev, &mut z);
        for k in 0..h {
            r[k] = sigmoid(r[k] + b_hr[k]);
            z[k] = sigmoid(z[k] + b_hz[k]);
        }
        let mut hn = b_hn.to_vec();
        matvec_add(w_hn, prev, &mut hn);
        let mut n = b_in.to_vec();
        matvec_add(w_in, input, &mut n);
        for k in 0..h {
            n[k] = libm::tanh(n[k] + r[k] * hn[k]);
        }
        let h_new: Vec<f64> = (0..h)
            .map(|k| (1.0 - z[k]) * n[k] + z[k] * prev[k])
            .collect();
        let mut out = p[13].to_vec();
        matvec_add(p[12], &h_new, &mut out);
        (out, GruCache { r, z, n, hn, h_new })
    }

    /// Accumulates `J^T cotangent` into `grad`, where `J` is the Jacobian of the
    /// output with respect to the parameters. Recurrent heads differentiate one
    /// step with `hidden` held fixed.
    pub fn accumulate_grad(
        &self,
        input: &[f64],
        hidden: Option<&[f64]>,
        cotangent: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        self.check_input(input)?;
        self.check_hidden(hidden)?;
        if cotangent.len() != self.outputs {
            return Err(Error::Shape {
                expected: self.outputs,
                got: cotangent.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::Shape {
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        match self.arch {
            Architecture::Linear => {
                let (dw, db) = grad.split_at_mut(self.outputs * self.inputs);
                outer_add(cotangent, input, dw);
                for (d, g) in db.iter_mut().zip(cotangent) {
                    *d += g;
                }
            }
            Architecture::Tabular => outer_add(cotangent, input, grad),
            Architecture::Mlp { hidden: h } => {
                let (_, act) = self.mlp_forward(input, h);
                self.mlp_backward(input, &act, h, cotangent, grad);
            }
            Architecture::Recurrent { hidden: h } => {
                let zeros = vec![0.0; h];
                let prev = hidden.unwrap_or(&zeros);
                let (_, c) = self.gru_forward(input, prev, h);
                let lens = self.gru_lens(h);
                let p = split(&self.params, &lens);
                let mut g = split_mut(grad, &lens);
                outer_add(cotangent, &c.h_new, g[12]);
                for (d, x) in g[13].iter_mut().zip(cotangent) {
                    *d += x;
                }
                let mut dh_new = vec![0.0; h];
                matvec_t_add(p[12], cotangent, &mut dh_new);
                let mut dan = vec![0.0; h];
                let mut dar = vec![0.0; h];
                let mut daz = vec![0.0; h];
                let mut dhn = vec![0.0; h];
                for k in 0..h {
                    let dn = dh_new[k] * (1.0 - c.z[k]);
                    let dz = dh_new[k] * (prev[k] - c.n[k]);
                    dan[k] = dn * (1.0 - c.n[k] * c.n[k]);
                    dhn[k] = dan[k] * c.r[k];
                    let dr = dan[k] * c.hn[k];
                    dar[k] = dr * c.r[k] * (1.0 - c.r[k]);
                    daz[k] = dz * c.z[k] * (1.0 - c.z[k]);
                }
                outer_add(&dar, input, g[0]);
                outer_add(&daz, input, g[1]);
                outer_add(&dan, input, g[2]);
                outer_add(&dar, prev, g[6]);
                outer_add(&daz, prev, g[7]);
                outer_add(&dhn, prev, g[8]);
                for k in 0..h {
                    g[3][k] += dar[k];
                    g[4][k] += daz[k];
                    g[5][k] += dan[k];
                    g[9][k] += dar[k];
                    g[10][k] += daz[k];
                    g[11][k] += dhn[k];
                }
            }
        }
        Ok(())
    }

    /// `J^T cotangent` as a fresh vector.
    pub fn grad(
        &self,
        input: &[f64],
        hidden: Option<&[f64]>,
        cotangent: &[f64],
    ) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_grad(input, hidden, cotangent, &mut g)?;
        Ok(g)
    }

    /// Makes output `k` start at `value` for every input: through the output bias,
    /// or for tabular heads through every weight of row `k` (exact for one-hot
    /// inputs).
    pub fn set_output_offset(&mut self, k: usize, value: f64) {
        let n = self.params.len();
        match self.arch {
            Architecture::Tabular => {
                let i = self.inputs;
                self.params[k * i..(k + 1) * i].fill(value);
            }
            _ => self.params[n - self.outputs + k] = value,
        }
    }
}
