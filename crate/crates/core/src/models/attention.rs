//! Pre-norm self-attention encoder over a `w × d` window with a scalar head.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{add_col_sums, add_row_bias, gemm, matmul};
use super::loss::{smooth_l1, smooth_l1_grad};
use super::params::{xavier_uniform, ParamLayout};
use crate::{Error, Result};

/// Added to the variance inside layer normalization.
pub const LN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    #[default]
    Mean,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttentionDims {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    /// Feed-forward width as a multiple of `d_model`.
    pub ffn_mult: usize,
    pub pooling: Pooling,
}

impl Default for AttentionDims {
    fn default() -> Self {
        AttentionDims {
            d_model: 64,
            heads: 4,
            layers: 2,
            ffn_mult: 4,
            pooling: Pooling::Mean,
        }
    }
}

impl AttentionDims {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.ffn_mult == 0 {
            return Err(Error::invalid("attention sizes must be >= 1"));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!(
                "heads ({}) must divide d_model ({})",
                self.heads, self.d_model
            )));
        }
        Ok(())
    }
}

/// `sin(pos / 10000^(2k/d))` on even dims `2k`, `cos` of the same on odd dims.
pub fn sinusoidal_pe(pos: usize, dim_index: usize, d_model: usize) -> f64 {
    let k = (dim_index / 2) as f64;
    let angle = pos as f64 / 10000f64.powf(2.0 * k / d_model as f64);
    if dim_index.is_multiple_of(2) {
        angle.sin()
    } else {
        angle.cos()
    }
}

pub fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let t = (c * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Row-wise normalization. Returns `(xhat, inv_std, gamma·xhat + beta)`.
fn layer_norm(x: &[f64], d: usize, gamma_beta: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (gamma, beta) = gamma_beta.split_at(d);
    let rows = x.len() / d;
    let mut xhat = vec![0.0; x.len()];
    let mut inv = vec![0.0; rows];
    let mut y = vec![0.0; x.len()];
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mu = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv[r] = is;
        for c in 0..d {
            let xh = (row[c] - mu) * is;
            xhat[r * d + c] = xh;
            y[r * d + c] = gamma[c] * xh + beta[c];
        }
    }
    (xhat, inv, y)
}

/// Accumulates input gradients into `dx` and affine gradients into `dgb`.
fn layer_norm_backward(
    dy: &[f64],
    xhat: &[f64],
    inv: &[f64],
    gamma: &[f64],
    dgb: &mut [f64],
    dx: &mut [f64],
) {
    let d = gamma.len();
    let (dgamma, dbeta) = dgb.split_at_mut(d);
    let mut dxhat = vec![0.0; d];
    for (r, &is) in inv.iter().enumerate() {
        let base = r * d;
        let mut sum = 0.0;
        let mut sum_x = 0.0;
        for c in 0..d {
            let g = dy[base + c];
            dgamma[c] += g * xhat[base + c];
            dbeta[c] += g;
            dxhat[c] = g * gamma[c];
            sum += dxhat[c];
            sum_x += dxhat[c] * xhat[base + c];
        }
        for c in 0..d {
            dx[base + c] += is / d as f64 * (d as f64 * dxhat[c] - sum - xhat[base + c] * sum_x);
        }
    }
}

/// Scaled dot-product attention per head. Returns the concatenated head
/// outputs (`w × d_model`) and the probabilities (`heads × w × w`).
pub fn multi_head_attention(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    w: usize,
    d_model: usize,
    heads: usize,
) -> (Vec<f64>, Vec<f64>) {
    let dh = d_model / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = vec![0.0; w * d_model];
    let mut probs = vec![0.0; heads * w * w];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..w {
            let p = &mut probs[(h * w + i) * w..(h * w + i + 1) * w];
            let qi = &q[i * d_model + off..i * d_model + off + dh];
            for j in 0..w {
                let kj = &k[j * d_model + off..j * d_model + off + dh];
                p[j] = scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>();
            }
            let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for s in p.iter_mut() {
                *s = (*s - max).exp();
                sum += *s;
            }
            for s in p.iter_mut() {
                *s /= sum;
            }
            let oi = &mut out[i * d_model + off..i * d_model + off + dh];
            for j in 0..w {
                let vj = &v[j * d_model + off..j * d_model + off + dh];
                for (o, x) in oi.iter_mut().zip(vj) {
                    *o += p[j] * x;
                }
            }
        }
    }
    (out, probs)
}

#[allow(clippy::too_many_arguments)]
fn multi_head_attention_backward(
    d_out: &[f64],
    q: &[f64],
    k: &[f64],
    v: &[f64],
    probs: &[f64],
    w: usize,
    d_model: usize,
    heads: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dh = d_model / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = vec![0.0; w * d_model];
    let mut dk = vec![0.0; w * d_model];
    let mut dv = vec![0.0; w * d_model];
    let mut dp = vec![0.0; w];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..w {
            let p = &probs[(h * w + i) * w..(h * w + i + 1) * w];
            let doi = &d_out[i * d_model + off..i * d_model + off + dh];
            let mut dot = 0.0;
            for j in 0..w {
                let r = j * d_model + off;
                dp[j] = doi.iter().zip(&v[r..r + dh]).map(|(a, b)| a * b).sum();
                for c in 0..dh {
                    dv[r + c] += p[j] * doi[c];
                }
                dot += p[j] * dp[j];
            }
            let ri = i * d_model + off;
            for j in 0..w {
                let ds = scale * p[j] * (dp[j] - dot);
                let rj = j * d_model + off;
                for c in 0..dh {
                    dq[ri + c] += ds * k[rj + c];
                    dk[rj + c] += ds * q[ri + c];
                }
            }
        }
    }
    (dq, dk, dv)
}

#[derive(Debug, Clone)]
struct LayerSlots {
    ln1: Range<usize>,
    wq: Range<usize>,
    bq: Range<usize>,
    wk: Range<usize>,
    bk: Range<usize>,
    wv: Range<usize>,
    bv: Range<usize>,
    wo: Range<usize>,
    bo: Range<usize>,
    ln2: Range<usize>,
    w1: Range<usize>,
    b1: Range<usize>,
    w2: Range<usize>,
    b2: Range<usize>,
}

#[derive(Debug, Clone)]
struct Slots {
    w_in: Range<usize>,
    b_in: Range<usize>,
    layers: Vec<LayerSlots>,
    w_head: Range<usize>,
    b_head: Range<usize>,
}

fn join(a: &Range<usize>, b: &Range<usize>) -> Range<usize> {
    debug_assert_eq!(a.end, b.start);
    a.start..b.end
}

/// Intermediate values of one encoder layer, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// Pre-affine output of the first layer norm.
    pub ln1_xhat: Vec<f64>,
    ln1_inv: Vec<f64>,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Attention probabilities, `heads × w × w`.
    pub probs: Vec<f64>,
    o: Vec<f64>,
    /// Pre-affine output of the second layer norm.
    pub ln2_xhat: Vec<f64>,
    ln2_inv: Vec<f64>,
    b: Vec<f64>,
    z: Vec<f64>,
    g: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trace {
    x: Vec<f64>,
    pub layers: Vec<LayerTrace>,
    pooled: Vec<f64>,
    pub output: f64,
}

#[derive(Debug, Clone)]
pub struct AttentionNet {
    pub window: usize,
    pub d_in: usize,
    pub dims: AttentionDims,
    layout: ParamLayout,
    slots: Slots,
    pe: Vec<f64>,
}

fn check_finite(x: &[f64], what: impl FnOnce() -> String) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what()))
    }
}

impl AttentionNet {
    pub fn new(window: usize, d_in: usize, dims: AttentionDims) -> Result<Self> {
        dims.validate()?;
        if window == 0 || d_in == 0 {
            return Err(Error::invalid("window and channel count must be >= 1"));
        }
        let dm = dims.d_model;
        let f = dims.ffn_mult * dm;
        let mut lay = ParamLayout::default();
        let w_in = lay.add("input.weight", &[d_in, dm]);
        let b_in = lay.add("input.bias", &[dm]);
        let mut layers = Vec::with_capacity(dims.layers);
        for l in 0..dims.layers {
            let p = |s: &str| format!("layers.{l}.{s}");
            let g1 = lay.add(p("ln1.gamma"), &[dm]);
            let be1 = lay.add(p("ln1.beta"), &[dm]);
            let wq = lay.add(p("attn.wq"), &[dm, dm]);
            let bq = lay.add(p("attn.bq"), &[dm]);
            let wk = lay.add(p("attn.wk"), &[dm, dm]);
            let bk = lay.add(p("attn.bk"), &[dm]);
            let wv = lay.add(p("attn.wv"), &[dm, dm]);
            let bv = lay.add(p("attn.bv"), &[dm]);
            let wo = lay.add(p("attn.wo"), &[dm, dm]);
            let bo = lay.add(p("attn.bo"), &[dm]);
            let g2 = lay.add(p("ln2.gamma"), &[dm]);
            let be2 = lay.add(p("ln2.beta"), &[dm]);
            let w1 = lay.add(p("ffn.w1"), &[dm, f]);
            let b1 = lay.add(p("ffn.b1"), &[f]);
            let w2 = lay.add(p("ffn.w2"), &[f, dm]);
            let b2 = lay.add(p("ffn.b2"), &[dm]);
            layers.push(LayerSlots {
                ln1: join(&g1, &be1),
                wq,
                bq,
                wk,
                bk,
                wv,
                bv,
                wo,
                bo,
                ln2: join(&g2, &be2),
                w1,
                b1,
                w2,
                b2,
            });
        }
        let w_head = lay.add("head.weight", &[dm, 1]);
        let b_head = lay.add("head.bias", &[1]);
        let mut pe = vec![0.0; window * dm];
        for t in 0..window {
            for c in 0..dm {
                pe[t * dm + c] = sinusoidal_pe(t, c, dm);
            }
        }
        Ok(AttentionNet {
            window,
            d_in,
            dims,
            layout: lay,
            slots: Slots {
                w_in,
                b_in,
                layers,
                w_head,
                b_head,
            },
            pe,
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.layout.total()
    }

    /// Xavier-uniform matrices, unit layer-norm gains, zero biases.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.num_params()];
        for e in &self.layout.entries {
            let dst = &mut p[e.range()];
            if e.name.ends_with(".gamma") {
                dst.fill(1.0);
            } else if e.shape.len() == 2 {
                xavier_uniform(dst, e.shape[0], e.shape[1], rng);
            }
        }
        p
    }

    fn check_shapes(&self, params: &[f64], x: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.num_params()),
                got: params.len().to_string(),
            });
        }
        if x.len() != self.window * self.d_in {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} window", self.window, self.d_in),
                got: format!("{} values", x.len()),
            });
        }
        Ok(())
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<Trace> {
        self.check_shapes(params, x)?;
        let (w, dm, heads) = (self.window, self.dims.d_model, self.dims.heads);
        let f = self.dims.ffn_mult * dm;
        let s = &self.slots;

        let mut h = matmul(x, &params[s.w_in.clone()], w, self.d_in, dm);
        add_row_bias(&mut h, &params[s.b_in.clone()]);
        for (hv, pe) in h.iter_mut().zip(&self.pe) {
            *hv += pe;
        }
        check_finite(&h, || "input_projection".into())?;

        let mut layers = Vec::with_capacity(s.layers.len());
        for (l, ls) in s.layers.iter().enumerate() {
            let (ln1_xhat, ln1_inv, a) = layer_norm(&h, dm, &params[ls.ln1.clone()]);
            let mut q = matmul(&a, &params[ls.wq.clone()], w, dm, dm);
            add_row_bias(&mut q, &params[ls.bq.clone()]);
            let mut k = matmul(&a, &params[ls.wk.clone()], w, dm, dm);
            add_row_bias(&mut k, &params[ls.bk.clone()]);
            let mut v = matmul(&a, &params[ls.wv.clone()], w, dm, dm);
            add_row_bias(&mut v, &params[ls.bv.clone()]);
            let (o, probs) = multi_head_attention(&q, &k, &v, w, dm, heads);
            gemm(&o, false, &params[ls.wo.clone()], false, &mut h, w, dm, dm, 1.0);
            add_row_bias(&mut h, &params[ls.bo.clone()]);
            check_finite(&h, || format!("encoder.{l}.attention"))?;

            let (ln2_xhat, ln2_inv, b) = layer_norm(&h, dm, &params[ls.ln2.clone()]);
            let mut z = matmul(&b, &params[ls.w1.clone()], w, dm, f);
            add_row_bias(&mut z, &params[ls.b1.clone()]);
            let g: Vec<f64> = z.iter().map(|&v| gelu(v)).collect();
            gemm(&g, false, &params[ls.w2.clone()], false, &mut h, w, f, dm, 1.0);
            add_row_bias(&mut h, &params[ls.b2.clone()]);
            check_finite(&h, || format!("encoder.{l}.feed_forward"))?;

            layers.push(LayerTrace {
                ln1_xhat,
                ln1_inv,
                a,
                q,
                k,
                v,
                probs,
                o,
                ln2_xhat,
                ln2_inv,
                b,
                z,
                g,
            });
        }

        let pooled: Vec<f64> = match self.dims.pooling {
            Pooling::Mean => {
                let mut m = vec![0.0; dm];
                add_col_sums(&h, &mut m);
                m.iter_mut().for_each(|v| *v /= w as f64);
                m
            }
            Pooling::Last => h[(w - 1) * dm..].to_vec(),
        };
        let head = &params[s.w_head.clone()];
        let output = pooled.iter().zip(head).map(|(a, b)| a * b).sum::<f64>() + params[s.b_head.start];
        if !output.is_finite() {
            return Err(Error::NonFinite("head".into()));
        }
        Ok(Trace {
            x: x.to_vec(),
            layers,
            pooled,
            output,
        })
    }

    pub fn predict(&self, params: &[f64], x: &[f64]) -> Result<f64> {
        Ok(self.forward(params, x)?.output)
    }

    /// Accumulates `d_output · ∂output/∂params` into `grad`.
    pub fn backward(&self, params: &[f64], trace: &Trace, d_output: f64, grad: &mut [f64]) {
        let (w, dm, heads) = (self.window, self.dims.d_model, self.dims.heads);
        let f = self.dims.ffn_mult * dm;
        let s = &self.slots;

        let head = &params[s.w_head.clone()];
        for (g, p) in grad[s.w_head.clone()].iter_mut().zip(&trace.pooled) {
            *g += d_output * p;
        }
        grad[s.b_head.start] += d_output;

        let mut dh = vec![0.0; w * dm];
        match self.dims.pooling {
            Pooling::Mean => {
                for row in dh.chunks_exact_mut(dm) {
                    for (d, hw) in row.iter_mut().zip(head) {
                        *d = d_output * hw / w as f64;
                    }
                }
            }
            Pooling::Last => {
                for (d, hw) in dh[(w - 1) * dm..].iter_mut().zip(head) {
                    *d = d_output * hw;
                }
            }
        }

        for (ls, lt) in s.layers.iter().zip(&trace.layers).rev() {
            // feed-forward block
            gemm(&lt.g, true, &dh, false, &mut grad[ls.w2.clone()], f, w, dm, 1.0);
            add_col_sums(&dh, &mut grad[ls.b2.clone()]);
            let mut dz = vec![0.0; w * f];
            gemm(&dh, false, &params[ls.w2.clone()], true, &mut dz, w, dm, f, 0.0);
            for (d, &z) in dz.iter_mut().zip(&lt.z) {
                *d *= gelu_grad(z);
            }
            gemm(&lt.b, true, &dz, false, &mut grad[ls.w1.clone()], dm, w, f, 1.0);
            add_col_sums(&dz, &mut grad[ls.b1.clone()]);
            let mut db = vec![0.0; w * dm];
            gemm(&dz, false, &params[ls.w1.clone()], true, &mut db, w, f, dm, 0.0);
            let gamma2 = &params[ls.ln2.start..ls.ln2.start + dm];
            layer_norm_backward(&db, &lt.ln2_xhat, &lt.ln2_inv, gamma2, &mut grad[ls.ln2.clone()], &mut dh);

            // attention block
            gemm(&lt.o, true, &dh, false, &mut grad[ls.wo.clone()], dm, w, dm, 1.0);
            add_col_sums(&dh, &mut grad[ls.bo.clone()]);
            let mut d_o = vec![0.0; w * dm];
            gemm(&dh, false, &params[ls.wo.clone()], true, &mut d_o, w, dm, dm, 0.0);
            let (dq, dk, dv) =
                multi_head_attention_backward(&d_o, &lt.q, &lt.k, &lt.v, &lt.probs, w, dm, heads);
            let mut da = vec![0.0; w * dm];
            for (dx, wr, br) in [(&dq, &ls.wq, &ls.bq), (&dk, &ls.wk, &ls.bk), (&dv, &ls.wv, &ls.bv)] {
                gemm(&lt.a, true, dx, false, &mut grad[wr.clone()], dm, w, dm, 1.0);
                add_col_sums(dx, &mut grad[br.clone()]);
                gemm(dx, false, &params[wr.clone()], true, &mut da, w, dm, dm, 1.0);
            }
            let gamma1 = &params[ls.ln1.start..ls.ln1.start + dm];
            layer_norm_backward(&da, &lt.ln1_xhat, &lt.ln1_inv, gamma1, &mut grad[ls.ln1.clone()], &mut dh);
        }

        gemm(&trace.x, true, &dh, false, &mut grad[s.w_in.clone()], self.d_in, w, dm, 1.0);
        add_col_sums(&dh, &mut grad[s.b_in.clone()]);
    }

    /// SmoothL1 loss for one example; its gradient is added to `grad`.
    pub fn loss_and_grad(&self, params: &[f64], x: &[f64], y: f64, beta: f64, grad: &mut [f64]) -> Result<f64> {
        let trace = self.forward(params, x)?;
        let e = trace.output - y;
        self.backward(params, &trace, smooth_l1_grad(e, beta), grad);
        Ok(smooth_l1(e, beta))
    }
}
