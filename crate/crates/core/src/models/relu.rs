//! Fully connected ReLU network trained with Adam on an L1-penalized MSE.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FittedModel, ModelParams, ModelSpec};
use crate::error::{Error, Result};
use crate::ingest::TabularDataset;
use crate::matrix::Matrix;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReluDnnSpec {
    pub layer_sizes: Vec<usize>,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l1_regularization: f64,
    pub dropout: f64,
    pub early_stop_epochs: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for ReluDnnSpec {
    fn default() -> Self {
        ReluDnnSpec {
            layer_sizes: vec![40, 40],
            max_epochs: 1000,
            learning_rate: 0.001,
            batch_size: 500,
            l1_regularization: 1e-5,
            dropout: 0.0,
            early_stop_epochs: 20,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Affine layer; `weights[o][i]` maps input `i` to output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn n_in(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn n_out(&self) -> usize {
        self.bias.len()
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .iter()
                .zip(&self.bias)
                .map(|(w, b)| b + w.iter().zip(input).map(|(a, x)| a * x).sum::<f64>()),
        );
    }
}

/// Hidden layers use ReLU; the last layer is linear with one output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluNet {
    pub layers: Vec<DenseLayer>,
}

impl ReluNet {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn init(n_inputs: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = stats::rng(seed);
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = 1.0 / (w[0].max(1) as f64).sqrt();
                let weights = (0..w[1])
                    .map(|_| (0..w[0]).map(|_| rng.random_range(-limit..limit)).collect())
                    .collect();
                let bias = (0..w[1]).map(|_| rng.random_range(-limit..limit)).collect();
                DenseLayer { weights, bias }
            })
            .collect();
        ReluNet { layers }
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(DenseLayer::n_out)
            .collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut a = row.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&a, &mut z);
            if l < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut a, &mut z);
        }
        a[0]
    }

    /// Hidden pre-activations of every hidden layer for `row`.
    pub fn preactivations(&self, row: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut a = row.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers[..self.layers.len() - 1] {
            layer.apply(&a, &mut z);
            out.push(z.clone());
            a = z.iter().map(|v| v.max(0.0)).collect();
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.n_out() * (l.n_in() + 1))
            .sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            for w in &l.weights {
                p.extend_from_slice(w);
            }
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            for w in &mut l.weights {
                let n = w.len();
                w.copy_from_slice(&p[k..k + n]);
                k += n;
            }
            let n = l.bias.len();
            l.bias.copy_from_slice(&p[k..k + n]);
            k += n;
        }
    }

    /// `mean((f(x) - y)^2) + l1 * sum|W|` over the given rows.
    pub fn loss(&self, x: &Matrix, y: &[f64], rows: &[usize], l1: f64) -> f64 {
        let mse = rows
            .iter()
            .map(|&i| {
                let r = self.predict_row(x.row(i)) - y[i];
                r * r
            })
            .sum::<f64>()
            / rows.len().max(1) as f64;
        mse + l1 * self.l1_norm()
    }

    fn l1_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().flatten())
            .map(|w| w.abs())
            .sum()
    }

    /// Loss and its analytic gradient over `rows` (no dropout).
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[f64], rows: &[usize], l1: f64) -> (f64, Vec<f64>) {
        self.backprop(x, y, rows, l1, None)
    }

    fn backprop(
        &self,
        x: &Matrix,
        y: &[f64],
        rows: &[usize],
        l1: f64,
        mut dropout: Option<(&mut dyn FnMut() -> bool, f64)>,
    ) -> (f64, Vec<f64>) {
        let n_layers = self.layers.len();
        let mut grads: Vec<(Vec<Vec<f64>>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![vec![0.0; l.n_in()]; l.n_out()], vec![0.0; l.n_out()]))
            .collect();
        let m = rows.len().max(1) as f64;
        let mut sse = 0.0;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        let mut gates: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        for &i in rows {
            acts.clear();
            gates.clear();
            acts.push(x.row(i).to_vec());
            let mut z = Vec::new();
            for (l, layer) in self.layers.iter().enumerate() {
                layer.apply(&acts[l], &mut z);
                if l + 1 < n_layers {
                    let gate: Vec<f64> = z
                        .iter()
                        .map(|&v| {
                            if v <= 0.0 {
                                return 0.0;
                            }
                            match dropout.as_mut() {
                                Some((keep, rate)) => {
                                    if keep() {
                                        1.0 / (1.0 - *rate)
                                    } else {
                                        0.0
                                    }
                                }
                                None => 1.0,
                            }
                        })
                        .collect();
                    let a: Vec<f64> = z.iter().zip(&gate).map(|(v, g)| v * g).collect();
                    gates.push(gate);
                    acts.push(a);
                } else {
                    acts.push(z.clone());
                }
            }
            let r = acts[n_layers][0] - y[i];
            sse += r * r;
            let mut delta = vec![2.0 * r / m];
            for l in (0..n_layers).rev() {
                let (gw, gb) = &mut grads[l];
                for (o, &dl) in delta.iter().enumerate() {
                    gb[o] += dl;
                    for (g, a) in gw[o].iter_mut().zip(&acts[l]) {
                        *g += dl * a;
                    }
                }
                if l == 0 {
                    break;
                }
                let layer = &self.layers[l];
                let gate = &gates[l - 1];
                delta = (0..layer.n_in())
                    .map(|k| {
                        gate[k]
                            * delta
                                .iter()
                                .enumerate()
                                .map(|(o, d)| d * layer.weights[o][k])
                                .sum::<f64>()
                    })
                    .collect();
            }
        }
        let mut flat = Vec::with_capacity(self.n_params());
        for (l, (gw, gb)) in grads.into_iter().enumerate() {
            for (o, row) in gw.into_iter().enumerate() {
                for (k, g) in row.into_iter().enumerate() {
                    flat.push(g + l1 * sign(self.layers[l].weights[o][k]));
                }
            }
            flat.extend(gb);
        }
        (sse / m + l1 * self.l1_norm(), flat)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * grad[k];
            self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * grad[k] * grad[k];
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

impl ReluDnnSpec {
    fn validate(&self) -> Result<()> {
        if self.layer_sizes.is_empty() || self.layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument("dropout must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument("batch_size and max_epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Trains the network and returns the parameters of the epoch with the
/// lowest validation MSE.
pub fn train_network(ds: &TabularDataset, spec: &ReluDnnSpec, epochs_hook: Option<&mut dyn FnMut(usize, &ReluNet)>) -> Result<ReluNet> {
    spec.validate()?;
    let train = ds.train_indices();
    if train.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "ReLU network needs at least 20 training rows, got {}",
            train.len()
        )));
    }
    let x = ds.x();
    let y = ds.y();
    let mut rng = stats::rng(spec.seed);
    let mut net = ReluNet::init(ds.n_features(), &spec.layer_sizes, spec.seed);

    let mut order = train.clone();
    order.shuffle(&mut rng);
    let n_val = ((train.len() as f64) * spec.validation_fraction).round() as usize;
    let (val, fit) = order.split_at(n_val.min(train.len() - 1));
    let (val, mut fit) = (val.to_vec(), fit.to_vec());
    let monitor = if val.is_empty() { fit.clone() } else { val.clone() };

    let mut params = net.params();
    let mut adam = Adam::new(params.len(), spec.learning_rate);
    let mut best = (f64::INFINITY, params.clone());
    let mut stale = 0;
    let mut hook = epochs_hook;
    let batch = spec.batch_size.min(fit.len());
    for epoch in 1..=spec.max_epochs {
        fit.shuffle(&mut rng);
        for chunk in fit.chunks(batch) {
            net.set_params(&params);
            let (loss, grad) = if spec.dropout > 0.0 {
                let rate = spec.dropout;
                let mut keep = || rng.random::<f64>() >= rate;
                net.backprop(x, y, chunk, spec.l1_regularization, Some((&mut keep, rate)))
            } else {
                net.backprop(x, y, chunk, spec.l1_regularization, None)
            };
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut params, &grad);
        }
        net.set_params(&params);
        let val_mse = net.loss(x, y, &monitor, 0.0);
        if !val_mse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        if let Some(h) = hook.as_mut() {
            h(epoch, &net);
        }
        if val_mse < best.0 {
            best = (val_mse, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= spec.early_stop_epochs {
                break;
            }
        }
    }
    net.set_params(&best.1);
    Ok(net)
}

pub fn fit_relu_dnn(ds: &TabularDataset, spec: &ReluDnnSpec) -> Result<FittedModel> {
    let net = train_network(ds, spec, None)?;
    Ok(FittedModel::new(
        ModelSpec::ReluDnn(spec.clone()),
        ds.feature_names().to_vec(),
        ModelParams::ReluDnn(net),
    ))
}
