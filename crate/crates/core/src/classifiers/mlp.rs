//! Feed-forward network: ReLU hidden layers, one logistic output unit,
//! cross-entropy loss, constant-step mini-batch gradient descent.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus, FitInfo, Hyperparams, Params};
use crate::linalg::{dot, Matrix};
use crate::rng;

/// Dense layer; `w` is `outputs x inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    /// He-uniform weights, zero biases.
    pub fn init(inputs: usize, hidden: &[usize], seed: u64) -> Network {
        let mut g = rng::seeded(seed, 0x31);
        let mut sizes = alloc::vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, out) = (w[0], w[1]);
                let bound = libm::sqrt(6.0 / fan_in.max(1) as f64);
                let data = (0..fan_in * out).map(|_| g.random_range(-bound..=bound)).collect();
                Layer {
                    w: Matrix::new(out, fan_in, data).expect("sizes agree"),
                    b: alloc::vec![0.0; out],
                }
            })
            .collect();
        Network { layers }
    }

    /// Pre-activations of every layer for one input.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let a: Vec<f64> = if l == 0 {
                x.to_vec()
            } else {
                zs[l - 1].iter().map(|&z| z.max(0.0)).collect()
            };
            let z = layer.w.iter_rows().zip(&layer.b).map(|(r, b)| dot(r, &a) + b).collect();
            zs.push(z);
        }
        zs
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.forward(x).last().expect("at least one layer")[0]
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.w.as_slice().len() + l.b.len()).sum()
    }

    /// All weights then biases, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for l in &self.layers {
            out.extend_from_slice(l.w.as_slice());
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn with_parameters(&self, p: &[f64]) -> Network {
        let mut net = self.clone();
        let mut at = 0;
        for l in &mut net.layers {
            let (r, c) = (l.w.rows(), l.w.cols());
            l.w = Matrix::new(r, c, p[at..at + r * c].to_vec()).expect("sizes agree");
            at += r * c;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
        net
    }

    /// Mean cross-entropy over the rows plus `lambda / 2` times the squared
    /// weight norm (biases unpenalized).
    pub fn loss(&self, rows: &[&[f64]], y: &[u8], lambda: f64) -> f64 {
        let ce: f64 = rows
            .iter()
            .zip(y)
            .map(|(r, &l)| {
                let z = self.logit(r);
                if l == 1 {
                    softplus(-z)
                } else {
                    softplus(z)
                }
            })
            .sum();
        let reg: f64 = self.layers.iter().map(|l| l.w.as_slice().iter().map(|w| w * w).sum::<f64>()).sum();
        ce / rows.len() as f64 + 0.5 * lambda * reg
    }

    /// Gradient of [`Network::loss`] by backpropagation, flattened like
    /// [`Network::parameters`].
    pub fn gradient(&self, rows: &[&[f64]], y: &[u8], lambda: f64) -> Vec<f64> {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (alloc::vec![0.0; l.w.as_slice().len()], alloc::vec![0.0; l.b.len()]))
            .collect();
        let scale = 1.0 / rows.len() as f64;
        for (x, &label) in rows.iter().zip(y) {
            let zs = self.forward(x);
            let last = self.layers.len() - 1;
            let mut delta = alloc::vec![(sigmoid(zs[last][0]) - f64::from(label)) * scale];
            for l in (0..=last).rev() {
                let layer = &self.layers[l];
                let input: Vec<f64> = if l == 0 {
                    x.to_vec()
                } else {
                    zs[l - 1].iter().map(|&z| z.max(0.0)).collect()
                };
                let (gw, gb) = &mut grads[l];
                let cols = layer.w.cols();
                for (o, &d) in delta.iter().enumerate() {
                    gb[o] += d;
                    for (g, a) in gw[o * cols..(o + 1) * cols].iter_mut().zip(&input) {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    delta = (0..cols)
                        .map(|j| {
                            if zs[l - 1][j] <= 0.0 {
                                return 0.0;
                            }
                            delta.iter().enumerate().map(|(o, d)| d * layer.w[(o, j)]).sum()
                        })
                        .collect();
                }
            }
        }
        let mut out = Vec::with_capacity(self.n_parameters());
        for (layer, (gw, gb)) in self.layers.iter().zip(grads) {
            out.extend(gw.iter().zip(layer.w.as_slice()).map(|(g, w)| g + lambda * w));
            out.extend(gb);
        }
        out
    }
}

pub(super) fn fit(x: &Matrix, y: &[u8], h: &Hyperparams, seed: u64) -> (Params, FitInfo) {
    let hidden = h.hidden_sizes.clone().unwrap_or_else(|| alloc::vec![32]);
    let lr = h.learning_rate.unwrap_or(0.05);
    let epochs = h.epochs.unwrap_or(200);
    let lambda = h.lambda.unwrap_or(1e-4);
    let batch = h.batch_size.unwrap_or(32);
    let mut net = Network::init(x.cols(), &hidden, seed);
    let mut g = rng::seeded(seed, 0x32);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let all: Vec<&[f64]> = x.iter_rows().collect();
    let mut trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(&mut g);
        for chunk in order.chunks(batch) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| x.row(i)).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| y[i]).collect();
            let grad = net.gradient(&rows, &labels, lambda);
            let mut p = net.parameters();
            p.iter_mut().zip(&grad).for_each(|(p, g)| *p -= lr * g);
            net = net.with_parameters(&p);
        }
        trace.push(net.loss(&all, y, lambda));
    }
    let info = FitInfo {
        iterations: epochs,
        final_loss: trace.last().copied(),
        loss_trace: trace,
    };
    (Params::Mlp(net), info)
}
