//! Feed-forward multi-quantile regressor: tanh hidden layers, one linear head per level.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{pinball, pinball_grad};
use super::params::{xavier_uniform, ParamLayout};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantileDims {
    pub hidden: usize,
    pub depth: usize,
    /// Ignore the window and learn one constant per level.
    pub constant_only: bool,
}

impl Default for QuantileDims {
    fn default() -> Self {
        QuantileDims {
            hidden: 64,
            depth: 2,
            constant_only: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuantileNet {
    pub in_dim: usize,
    pub quantiles: Vec<f64>,
    sizes: Vec<usize>,
    layout: ParamLayout,
}

pub fn validate_quantiles(quantiles: &[f64]) -> Result<()> {
    if quantiles.is_empty() {
        return Err(Error::invalid("at least one quantile level is required"));
    }
    if quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
        return Err(Error::invalid("quantile levels must lie in (0, 1)"));
    }
    if quantiles.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::invalid("quantile levels must be strictly increasing"));
    }
    Ok(())
}

impl QuantileNet {
    pub fn new(in_dim: usize, dims: QuantileDims, quantiles: &[f64]) -> Result<Self> {
        validate_quantiles(quantiles)?;
        let in_dim = if dims.constant_only { 0 } else { in_dim };
        let depth = if dims.constant_only { 0 } else { dims.depth };
        if depth > 0 && dims.hidden == 0 {
            return Err(Error::invalid("hidden width must be >= 1"));
        }
        let mut sizes = vec![in_dim];
        sizes.extend(std::iter::repeat_n(dims.hidden, depth));
        sizes.push(quantiles.len());
        let mut layout = ParamLayout::default();
        for (i, pair) in sizes.windows(2).enumerate() {
            layout.add(format!("layers.{i}.weight"), &[pair[0], pair[1]]);
            layout.add(format!("layers.{i}.bias"), &[pair[1]]);
        }
        Ok(QuantileNet {
            in_dim,
            quantiles: quantiles.to_vec(),
            sizes,
            layout,
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.layout.total()
    }

    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.num_params()];
        for e in &self.layout.entries {
            if e.shape.len() == 2 {
                xavier_uniform(&mut p[e.range()], e.shape[0], e.shape[1], rng);
            }
        }
        p
    }

    /// Activations of every layer; the last entry holds the raw head outputs.
    /// The input is truncated to `in_dim` values (all of it unless constant-only).
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if params.len() != self.num_params() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.num_params()),
                got: params.len().to_string(),
            });
        }
        if x.len() < self.in_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{} inputs", self.in_dim),
                got: x.len().to_string(),
            });
        }
        let mut acts = vec![x[..self.in_dim].to_vec()];
        let n_layers = self.sizes.len() - 1;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let wr = self.layout.entries[2 * l].range();
            let br = self.layout.entries[2 * l + 1].range();
            let w = &params[wr];
            let mut z = params[br].to_vec();
            let a = &acts[l];
            for i in 0..n_in {
                let ai = a[i];
                if ai != 0.0 {
                    for (zj, wij) in z.iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
                        *zj += ai * wij;
                    }
                }
            }
            if l + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("layers.{l}")));
            }
            acts.push(z);
        }
        Ok(acts)
    }

    pub fn backward(&self, params: &[f64], acts: &[Vec<f64>], d_out: &[f64], grad: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let mut delta = d_out.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let wr = self.layout.entries[2 * l].range();
            let br = self.layout.entries[2 * l + 1].range();
            let a = &acts[l];
            {
                let gw = &mut grad[wr.clone()];
                for i in 0..n_in {
                    for j in 0..n_out {
                        gw[i * n_out + j] += a[i] * delta[j];
                    }
                }
            }
            for (g, d) in grad[br].iter_mut().zip(&delta) {
                *g += d;
            }
            if l > 0 {
                let w = &params[wr];
                let mut prev = vec![0.0; n_in];
                for i in 0..n_in {
                    let s: f64 = w[i * n_out..(i + 1) * n_out].iter().zip(&delta).map(|(a, b)| a * b).sum();
                    prev[i] = s * (1.0 - a[i] * a[i]);
                }
                delta = prev;
            }
        }
    }

    /// Summed pinball loss over all levels for one example.
    pub fn loss_and_grad(&self, params: &[f64], x: &[f64], y: f64, grad: &mut [f64]) -> Result<f64> {
        let acts = self.forward(params, x)?;
        let out = acts.last().expect("output layer");
        let mut loss = 0.0;
        let mut d_out = vec![0.0; out.len()];
        for (k, &q) in self.quantiles.iter().enumerate() {
            loss += pinball(y, out[k], q);
            d_out[k] = pinball_grad(y, out[k], q);
        }
        self.backward(params, &acts, &d_out, grad);
        Ok(loss)
    }

    /// Head outputs sorted ascending so the levels never cross.
    pub fn predict_sorted(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.forward(params, x)?.pop().expect("output layer");
        out.sort_by(f64::total_cmp);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::engine_rng;
    use proptest::prelude::{prop, prop_assert, proptest, ProptestConfig};
    use rand::Rng;

    #[test]
    fn gradients_match_finite_differences() {
        let net = QuantileNet::new(5, QuantileDims { hidden: 4, depth: 2, constant_only: false }, &[0.1, 0.5, 0.9]).unwrap();
        let mut rng = engine_rng(3, 3);
        let params = net.init_params(&mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let out = net.forward(&params, &x).unwrap().pop().unwrap();
        // keep y away from every head output so the pinball kink is not straddled
        let y = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.37;
        let mut grad = vec![0.0; params.len()];
        net.loss_and_grad(&params, &x, y, &mut grad).unwrap();
        let loss = |p: &[f64]| {
            let o = net.forward(p, &x).unwrap().pop().unwrap();
            net.quantiles.iter().zip(&o).map(|(q, v)| pinball(y, *v, *q)).sum::<f64>()
        };
        let h = 1e-5;
        let mut p = params.clone();
        for i in 0..p.len() {
            let orig = p[i];
            p[i] = orig + h;
            let up = loss(&p);
            p[i] = orig - h;
            let down = loss(&p);
            p[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[i]).abs() / (fd.abs() + grad[i].abs()).max(1e-6);
            assert!(err <= 1e-4, "param {i}: fd {fd} analytic {}", grad[i]);
        }
    }

    #[test]
    fn constant_only_has_just_biases() {
        let net = QuantileNet::new(40, QuantileDims { constant_only: true, ..Default::default() }, &[0.1, 0.5, 0.9]).unwrap();
        assert_eq!(net.num_params(), 3);
        let out = net.forward(&[1.0, 2.0, 3.0], &[9.0; 40]).unwrap().pop().unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_bad_levels() {
        let d = QuantileDims::default();
        assert!(QuantileNet::new(3, d, &[]).is_err());
        assert!(QuantileNet::new(3, d, &[0.5, 0.1]).is_err());
        assert!(QuantileNet::new(3, d, &[0.0, 0.5]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sorted_outputs_never_cross(seed in 0u64..1000, xs in prop::collection::vec(-5.0f64..5.0, 6)) {
            let net = QuantileNet::new(6, QuantileDims { hidden: 8, depth: 2, constant_only: false }, &[0.1, 0.5, 0.9]).unwrap();
            let params = net.init_params(&mut engine_rng(seed, 0));
            let out = net.predict_sorted(&params, &xs).unwrap();
            prop_assert!(out[0] <= out[1] && out[1] <= out[2]);
        }
    }
}
