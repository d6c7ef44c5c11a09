//! A small fully connected classifier with pluggable hidden activations.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::fitter::DapaTable;
use crate::numeric::KahanSum;
use crate::reference::ActivationKind;
use crate::synth::{self, Dataset};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub enum ActivationImpl {
    Exact(ActivationKind),
    /// Forward through the table; backward through its derivative table.
    Dapa(DapaTable),
}

impl ActivationImpl {
    #[inline]
    fn forward(&self, z: f64) -> f64 {
        match self {
            ActivationImpl::Exact(k) => k.value(z),
            ActivationImpl::Dapa(t) => t.eval(z),
        }
    }

    #[inline]
    fn backward(&self, z: f64) -> f64 {
        match self {
            ActivationImpl::Exact(k) => k.derivative(z),
            ActivationImpl::Dapa(t) => t.eval_derivative(z),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ActivationImpl::Exact(_) => "exact",
            ActivationImpl::Dapa(_) => "dapa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.bias[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            out.push(acc);
        }
    }
}

/// Feed-forward network; every hidden layer shares one activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyNet {
    dims: Vec<usize>,
    layers: Vec<Layer>,
}

/// Per-sample forward state kept for backpropagation.
struct Tape {
    /// Input of each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn log_softmax_loss(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = total.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

impl ToyNet {
    /// He-style normal initialization from a seed.
    pub fn new(dims: &[usize], seed: u64) -> Self {
        assert!(dims.len() >= 2 && dims.iter().all(|&d| d > 0), "invalid dims {dims:?}");
        let mut rng = synth::rng(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).unwrap();
                Layer {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs).map(|_| normal.sample(&mut rng)).collect(),
                    bias: vec![0.0; outputs],
                }
            })
            .collect();
        Self {
            dims: dims.to_vec(),
            layers,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weights then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            let (nw, nb) = (l.weights.len(), l.bias.len());
            l.weights.copy_from_slice(&p[off..off + nw]);
            l.bias.copy_from_slice(&p[off + nw..off + nw + nb]);
            off += nw + nb;
        }
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn forward(&self, x: &[f64], act: &ActivationImpl) -> Tape {
        let hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(hidden);
        let mut cur = x.to_vec();
        let mut z = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut z);
            inputs.push(std::mem::take(&mut cur));
            if i < hidden {
                cur = z.iter().map(|&v| act.forward(v)).collect();
                pre.push(z.clone());
            }
        }
        Tape { inputs, pre, logits: z }
    }

    /// Hidden pre-activations over a dataset, all layers pooled.
    pub fn pre_activations(&self, data: &Dataset, act: &ActivationImpl) -> Vec<f64> {
        let mut out = Vec::new();
        for x in &data.inputs {
            let tape = self.forward(x, act);
            for layer in tape.pre {
                out.extend(layer);
            }
        }
        out
    }

    /// Mean cross-entropy loss.
    pub fn loss(&self, data: &Dataset, act: &ActivationImpl) -> f64 {
        let mut acc = KahanSum::new();
        for (x, &y) in data.inputs.iter().zip(&data.labels) {
            let tape = self.forward(x, act);
            acc.add(log_softmax_loss(&tape.logits, y).0);
        }
        acc.value() / data.inputs.len() as f64
    }

    /// Mean loss and its gradient (flattened like [`ToyNet::params`]). The
    /// backward pass multiplies by `act.backward`, so a table activation
    /// uses its derivative table rather than the forward table's slope.
    pub fn loss_and_grad(&self, data: &Dataset, act: &ActivationImpl) -> (f64, Vec<f64>) {
        let n = data.inputs.len() as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let mut loss = KahanSum::new();
        for (x, &y) in data.inputs.iter().zip(&data.labels) {
            let tape = self.forward(x, act);
            let (l, mut delta) = log_softmax_loss(&tape.logits, y);
            loss.add(l);
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &tape.inputs[li];
                let (gw, gb) = &mut grads[li];
                for o in 0..layer.outputs {
                    let d = delta[o];
                    gb[o] += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, v) in row.iter_mut().zip(input) {
                        *g += d * v;
                    }
                }
                if li == 0 {
                    break;
                }
                let pre = &tape.pre[li - 1];
                let mut next = vec![0.0; layer.inputs];
                for o in 0..layer.outputs {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (acc, w) in next.iter_mut().zip(row) {
                        *acc += w * delta[o];
                    }
                }
                for (g, &z) in next.iter_mut().zip(pre) {
                    *g *= act.backward(z);
                }
                delta = next;
            }
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (gw, gb) in grads {
            flat.extend(gw.into_iter().map(|g| g / n));
            flat.extend(gb.into_iter().map(|g| g / n));
        }
        (loss.value() / n, flat)
    }

    /// One full-batch SGD step; returns the loss before the update.
    pub fn sgd_step(&mut self, data: &Dataset, act: &ActivationImpl, lr: f64) -> f64 {
        let (loss, grad) = self.loss_and_grad(data, act);
        let mut off = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w -= lr * grad[off];
                off += 1;
            }
        }
        loss
    }
}
