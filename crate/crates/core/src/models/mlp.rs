//! Fully connected network with a linear multi-output head.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (out × in, row-major) followed by the bias vector. The training loss is
//!
//! ```text
//! L = Σ_observed (ŷ − y)² / (2·N_obs) + α/(2·n) · Σ W²
//! ```
//!
//! with `N_obs` the number of observed target cells, `n` the number of rows,
//! and biases excluded from the penalty.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::lbfgs::{self, LbfgsConfig, LbfgsReport};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    /// Layer widths, input first, output last.
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

impl Network {
    pub fn n_params(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// Weights and biases uniform in ±√(3/fan_in), drawn from `seed`.
    pub fn init(sizes: &[usize], activation: Activation, seed: u64) -> Self {
        let mut r = rng::rng(seed);
        let mut params = Vec::with_capacity(Self::n_params(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (3.0 / fan_in as f64).sqrt();
            for _ in 0..fan_out * fan_in + fan_out {
                params.push(r.random_range(-bound..bound));
            }
        }
        Network {
            sizes: sizes.to_vec(),
            activation,
            params,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn offsets(sizes: &[usize]) -> Vec<(usize, usize, usize)> {
        let mut off = 0;
        sizes
            .windows(2)
            .map(|w| {
                let start = off;
                off += w[1] * w[0] + w[1];
                (start, w[0], w[1])
            })
            .collect()
    }

    fn layer<'a>(params: &'a [f64], (start, fan_in, fan_out): (usize, usize, usize)) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let w = ArrayView2::from_shape((fan_out, fan_in), &params[start..start + fan_out * fan_in]).unwrap();
        let b = ArrayView1::from(&params[start + fan_out * fan_in..start + fan_out * fan_in + fan_out]);
        (w, b)
    }

    /// Activations of every layer, input included.
    fn forward_all(sizes: &[usize], activation: Activation, params: &[f64], x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let offs = Self::offsets(sizes);
        let mut acts = vec![x.to_owned()];
        for (l, &o) in offs.iter().enumerate() {
            let (w, b) = Self::layer(params, o);
            let mut z = acts[l].dot(&w.t());
            z += &b;
            if l + 1 < offs.len() {
                z.mapv_inplace(|v| activation.apply(v));
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        Self::forward_all(&self.sizes, self.activation, &self.params, x).pop().unwrap()
    }

    /// Regularised loss and its gradient at `params`.
    pub fn loss_and_gradient(
        sizes: &[usize],
        activation: Activation,
        params: &[f64],
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        mask: Option<ArrayView2<bool>>,
        l2_alpha: f64,
        grad: &mut [f64],
    ) -> f64 {
        let n = x.nrows() as f64;
        let acts = Self::forward_all(sizes, activation, params, x);
        let out = acts.last().unwrap();
        let mut delta = out - &y;
        let n_obs = match mask {
            Some(m) => {
                ndarray::Zip::from(&mut delta).and(m).for_each(|d, &keep| {
                    if !keep {
                        *d = 0.0;
                    }
                });
                m.iter().filter(|&&k| k).count() as f64
            }
            None => delta.len() as f64,
        };
        let n_obs = n_obs.max(1.0);
        let mut loss = delta.iter().map(|d| d * d).sum::<f64>() / (2.0 * n_obs);
        delta.mapv_inplace(|d| d / n_obs);

        let offs = Self::offsets(sizes);
        let reg = l2_alpha / n;
        for l in (0..offs.len()).rev() {
            let o = offs[l];
            let (w, _) = Self::layer(params, o);
            let (start, fan_in, fan_out) = o;
            let gw = delta.t().dot(&acts[l]);
            let gb = delta.sum_axis(Axis(0));
            {
                let mut gw_out =
                    ArrayViewMut2::from_shape((fan_out, fan_in), &mut grad[start..start + fan_out * fan_in]).unwrap();
                gw_out.assign(&gw);
                gw_out.scaled_add(reg, &w);
            }
            grad[start + fan_out * fan_in..start + fan_out * fan_in + fan_out]
                .copy_from_slice(gb.as_slice().unwrap());
            loss += 0.5 * reg * w.iter().map(|v| v * v).sum::<f64>();
            if l > 0 {
                let mut prev = delta.dot(&w);
                ndarray::Zip::from(&mut prev)
                    .and(&acts[l])
                    .for_each(|d, &a| *d *= activation.derivative_from_output(a));
                delta = prev;
            }
        }
        loss
    }

    /// Trains in place with L-BFGS on already-scaled data.
    pub fn train(
        &mut self,
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        mask: Option<ArrayView2<bool>>,
        l2_alpha: f64,
        cfg: &LbfgsConfig,
    ) -> LbfgsReport {
        let sizes = self.sizes.clone();
        let act = self.activation;
        let mut obj = |p: &[f64], g: &mut [f64]| Self::loss_and_gradient(&sizes, act, p, x, y, mask, l2_alpha, g);
        let (params, report) = lbfgs::minimize(&mut obj, std::mem::take(&mut self.params), cfg);
        self.params = params;
        report
    }
}
