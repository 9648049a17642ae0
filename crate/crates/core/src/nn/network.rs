//! The full forecasting network: LSTM layer, ReLU head, linear output.
//!
//! The last hidden state of the LSTM feeds the dense head; the linear
//! output layer adapts it to the forecast horizon (times the number of
//! series for parallel multi-product models). Dropout sits after each
//! nonlinear dense layer only, never inside the recurrence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::dense::{dropout_with_mask, Activation, DenseParams};
use crate::nn::lstm::{self, LstmParams, LstmTrace};

/// All trainable parameters. The same structure doubles as the gradient
/// accumulator, shape for shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub lstm: LstmParams,
    /// Hidden ReLU layers followed by the final linear layer.
    pub head: Vec<DenseParams>,
}

/// Dropout placement during training: one flag per hidden head layer.
#[derive(Debug, Clone)]
pub struct DropoutPlan {
    pub enabled: Vec<bool>,
    pub rate: f64,
}

impl DropoutPlan {
    pub fn none(n_hidden: usize) -> Self {
        DropoutPlan {
            enabled: vec![false; n_hidden],
            rate: 0.0,
        }
    }

    fn active(&self, layer: usize) -> bool {
        self.rate > 0.0 && self.enabled.get(layer).copied().unwrap_or(false)
    }
}

impl NetworkParams {
    /// Fresh network: `input_dim` features in, `output_dim` forecasts out,
    /// hidden dense widths as listed.
    pub fn init<R: Rng>(
        input_dim: usize,
        lstm_units: usize,
        dense_units: &[usize],
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let lstm = LstmParams::init(input_dim, lstm_units, rng);
        let mut head = Vec::with_capacity(dense_units.len() + 1);
        let mut in_dim = lstm_units;
        for &units in dense_units {
            head.push(DenseParams::init(in_dim, units, Activation::Relu, rng));
            in_dim = units;
        }
        head.push(DenseParams::init(in_dim, output_dim, Activation::Linear, rng));
        NetworkParams { lstm, head }
    }

    pub fn zeros_like(&self) -> Self {
        let lstm = LstmParams::zeros(self.lstm.input_dim, self.lstm.hidden_dim);
        let head = self
            .head
            .iter()
            .map(|l| DenseParams::zeros(l.in_dim, l.out_dim, l.activation))
            .collect();
        NetworkParams { lstm, head }
    }

    pub fn input_dim(&self) -> usize {
        self.lstm.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.head.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.head.len().saturating_sub(1)
    }

    pub fn n_params(&self) -> usize {
        self.lstm.n_params() + self.head.iter().map(DenseParams::n_params).sum::<usize>()
    }

    /// Flat parameter vector: LSTM w, r, b per gate, then head layers.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for g in 0..lstm::N_GATES {
            out.extend_from_slice(&self.lstm.w[g]);
        }
        for g in 0..lstm::N_GATES {
            out.extend_from_slice(&self.lstm.r[g]);
        }
        for g in 0..lstm::N_GATES {
            out.extend_from_slice(&self.lstm.b[g]);
        }
        for layer in &self.head {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    /// Inverse of [`NetworkParams::flatten`]; shapes must match.
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter size mismatch");
        let mut pos = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[pos..pos + dst.len()]);
            pos += dst.len();
        };
        for g in 0..lstm::N_GATES {
            take(&mut self.lstm.w[g]);
        }
        for g in 0..lstm::N_GATES {
            take(&mut self.lstm.r[g]);
        }
        for g in 0..lstm::N_GATES {
            take(&mut self.lstm.b[g]);
        }
        for layer in &mut self.head {
            take(&mut layer.weights);
            take(&mut layer.bias);
        }
    }

    /// Inference forward pass (dropout is the identity).
    pub fn predict(&self, x_seq: &[Vec<f64>]) -> Result<Vec<f64>> {
        let trace = lstm::forward_trace(&self.lstm, x_seq)?;
        let mut a = trace.final_h();
        for layer in &self.head {
            if a.len() != layer.in_dim {
                return Err(Error::LengthMismatch {
                    left: a.len(),
                    right: layer.in_dim,
                    context: "dense layer input",
                });
            }
            let z = layer.preactivation(&a);
            a = layer.activate(&z);
        }
        Ok(a)
    }
}

/// Everything the backward pass needs from one training forward pass.
pub struct ForwardTrace {
    lstm: LstmTrace,
    /// Input activation of each head layer.
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-activation of each head layer.
    preacts: Vec<Vec<f64>>,
    /// Dropout multiplier mask per head layer (hidden layers only).
    masks: Vec<Option<Vec<f64>>>,
    pub output: Vec<f64>,
}

/// Training-mode forward pass with cached intermediates.
pub fn forward_trace<R: Rng>(
    params: &NetworkParams,
    x_seq: &[Vec<f64>],
    dropout: &DropoutPlan,
    training: bool,
    rng: &mut R,
) -> Result<ForwardTrace> {
    let lstm_trace = lstm::forward_trace(&params.lstm, x_seq)?;
    let mut a = lstm_trace.final_h();
    let n_layers = params.head.len();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut preacts = Vec::with_capacity(n_layers);
    let mut masks = Vec::with_capacity(n_layers);
    for (idx, layer) in params.head.iter().enumerate() {
        if a.len() != layer.in_dim {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: layer.in_dim,
                context: "dense layer input",
            });
        }
        let z = layer.preactivation(&a);
        let mut act = layer.activate(&z);
        let is_hidden = idx + 1 < n_layers;
        let mask = if is_hidden && dropout.active(idx) {
            let (dropped, mask) = dropout_with_mask(&act, dropout.rate, training, rng)?;
            act = dropped;
            mask
        } else {
            None
        };
        layer_inputs.push(a);
        preacts.push(z);
        masks.push(mask);
        a = act;
    }
    Ok(ForwardTrace {
        lstm: lstm_trace,
        layer_inputs,
        preacts,
        masks,
        output: a,
    })
}

/// Mean of squared componentwise differences.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
            context: "mse loss",
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput { context: "mse loss" });
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// One (input sequence, target vector) training pair, borrowed.
pub struct BatchItem<'a> {
    pub input: &'a [Vec<f64>],
    pub target: &'a [f64],
}

/// Exact analytic gradients of the batch-mean MSE w.r.t. every parameter,
/// plus the loss itself. Dropout masks drawn here are part of the
/// differentiated function, so gradients stay exact for the sampled masks.
pub fn backward_batch<R: Rng>(
    params: &NetworkParams,
    batch: &[BatchItem<'_>],
    dropout: &DropoutPlan,
    training: bool,
    rng: &mut R,
) -> Result<(NetworkParams, f64)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput { context: "training batch" });
    }
    let mut grads = params.zeros_like();
    let mut total_loss = 0.0;
    let batch_n = batch.len() as f64;
    let out_dim = params.output_dim() as f64;

    for item in batch {
        let trace = forward_trace(params, item.input, dropout, training, rng)?;
        total_loss += mse_loss(&trace.output, item.target)?;

        // d(batch loss)/d(output_k) = 2 (y_k - t_k) / (out_dim * batch_n)
        let mut d_out: Vec<f64> = trace
            .output
            .iter()
            .zip(item.target)
            .map(|(y, t)| 2.0 * (y - t) / (out_dim * batch_n))
            .collect();

        for (idx, layer) in params.head.iter().enumerate().rev() {
            if let Some(mask) = &trace.masks[idx] {
                for (d, m) in d_out.iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            let z = &trace.preacts[idx];
            let d_z: Vec<f64> = match layer.activation {
                Activation::Relu => d_out
                    .iter()
                    .zip(z)
                    .map(|(d, &zz)| if zz > 0.0 { *d } else { 0.0 })
                    .collect(),
                Activation::Linear => d_out.clone(),
            };
            let a_in = &trace.layer_inputs[idx];
            let g = &mut grads.head[idx];
            for u in 0..layer.out_dim {
                let d = d_z[u];
                if d != 0.0 {
                    let row = &mut g.weights[u * layer.in_dim..(u + 1) * layer.in_dim];
                    for (wv, av) in row.iter_mut().zip(a_in) {
                        *wv += d * av;
                    }
                }
                g.bias[u] += d;
            }
            // Gradient w.r.t. the layer input.
            let mut d_in = vec![0.0; layer.in_dim];
            for u in 0..layer.out_dim {
                let d = d_z[u];
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[u * layer.in_dim..(u + 1) * layer.in_dim];
                for (dst, w) in d_in.iter_mut().zip(row) {
                    *dst += w * d;
                }
            }
            d_out = d_in;
        }

        lstm::backward_into(&params.lstm, item.input, &trace.lstm, &d_out, &mut grads.lstm);
    }

    Ok((grads, total_loss / batch_n))
}
