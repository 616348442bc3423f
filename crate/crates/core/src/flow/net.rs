//! The coordinate network h: R^3 -> R^3 whose parameters are optimized at
//! runtime, once per cluster. Small enough that hand-written reverse-mode
//! differentiation is simpler and faster than pulling in an autodiff stack.
//!
//! Parameters live in one flat buffer (per layer: row-major weights, then
//! biases) so the optimizer and the finite-difference tests can treat the
//! network as a plain parameter vector.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Activation for the hidden layers. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    /// Smooth and bounded; keeps the loss C^1 so gradient checks hold
    /// everywhere.
    Tanh,
}

#[derive(Debug, Clone, Copy)]
struct LayerSpec {
    w_off: usize,
    b_off: usize,
    n_in: usize,
    n_out: usize,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    specs: Vec<LayerSpec>,
    params: Vec<f64>,
    width: usize,
}

/// Per-point forward activations plus backward scratch, reusable across
/// iterations to keep the optimizer loop allocation-free.
#[derive(Debug, Clone)]
pub struct Cache {
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    dpre: Vec<f64>,
    dx: Vec<f64>,
}

impl Mlp {
    /// Builds a `3 -> width x hidden_layers -> 3` network with weights and
    /// biases drawn uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(hidden_layers: usize, width: usize, rng: &mut ChaCha8Rng) -> Mlp {
        assert!(hidden_layers >= 1 && width >= 1, "degenerate network shape");
        let mut dims = Vec::with_capacity(hidden_layers + 2);
        dims.push(3);
        dims.extend(std::iter::repeat(width).take(hidden_layers));
        dims.push(3);

        let mut specs = Vec::with_capacity(dims.len() - 1);
        let mut off = 0;
        for win in dims.windows(2) {
            let (n_in, n_out) = (win[0], win[1]);
            specs.push(LayerSpec { w_off: off, b_off: off + n_in * n_out, n_in, n_out });
            off += n_in * n_out + n_out;
        }
        let mut params = vec![0.0; off];
        for s in &specs {
            let bound = 1.0 / (s.n_in as f64).sqrt();
            for p in &mut params[s.w_off..s.b_off + s.n_out] {
                *p = rng.gen_range(-bound..=bound);
            }
        }
        Mlp { specs, params, width }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn cache(&self) -> Cache {
        let mut acts = vec![vec![0.0; 3]];
        for s in &self.specs {
            acts.push(vec![0.0; s.n_out]);
        }
        Cache { acts, dpre: vec![0.0; self.width.max(3)], dx: vec![0.0; self.width.max(3)] }
    }

    /// Forward pass, recording activations into `cache`.
    pub fn forward(&self, x: [f64; 3], cache: &mut Cache) -> [f64; 3] {
        cache.acts[0].copy_from_slice(&x);
        let last = self.specs.len() - 1;
        for (l, s) in self.specs.iter().enumerate() {
            let (input, output) = {
                let (head, tail) = cache.acts.split_at_mut(l + 1);
                (&head[l], &mut tail[0])
            };
            for o in 0..s.n_out {
                let row = &self.params[s.w_off + o * s.n_in..s.w_off + (o + 1) * s.n_in];
                let mut acc = self.params[s.b_off + o];
                for (w, xi) in row.iter().zip(input.iter()) {
                    acc += w * xi;
                }
                output[o] = if l == last { acc } else { acc.tanh() };
            }
        }
        let out = &cache.acts[self.specs.len()];
        [out[0], out[1], out[2]]
    }

    /// Reverse pass for one point. Accumulates parameter gradients into
    /// `grad` (same layout as `params`) and returns the gradient with
    /// respect to the network input — needed when this network's input is
    /// itself a function of upstream parameters.
    pub fn backward(&self, cache: &mut Cache, grad_out: [f64; 3], grad: &mut [f64]) -> [f64; 3] {
        debug_assert_eq!(grad.len(), self.params.len());
        let last = self.specs.len() - 1;
        cache.dpre[..3].copy_from_slice(&grad_out);
        for (l, s) in self.specs.iter().enumerate().rev() {
            // d(loss)/d(pre-activation): the recorded activation is
            // post-tanh on hidden layers, so tanh' = 1 - a^2.
            if l != last {
                let act = &cache.acts[l + 1];
                for o in 0..s.n_out {
                    cache.dpre[o] *= 1.0 - act[o] * act[o];
                }
            }
            let input = &cache.acts[l];
            for i in 0..s.n_in {
                cache.dx[i] = 0.0;
            }
            for o in 0..s.n_out {
                let d = cache.dpre[o];
                let row = s.w_off + o * s.n_in;
                for i in 0..s.n_in {
                    grad[row + i] += d * input[i];
                    cache.dx[i] += self.params[row + i] * d;
                }
                grad[s.b_off + o] += d;
            }
            cache.dpre[..s.n_in].copy_from_slice(&cache.dx[..s.n_in]);
        }
        [cache.dpre[0], cache.dpre[1], cache.dpre[2]]
    }
}
